/** Browser entry point: wire the app shell to a live service.
 *
 * The API origin defaults to the page origin and can be overridden with
 * `?api=http://host:port` when the static files are served separately.
 */

import { App } from "./app.js";
import { Api, EventStream } from "./client.js";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return (override ?? window.location.origin).replace(/\/$/, "");
}

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const session = new URLSearchParams(window.location.search).get("session") ?? "default";
const api = new Api(apiBase(), session);
const app = new App(root, api);
const stream = new EventStream(
  apiBase(),
  session,
  {
    onEvent: (event) => app.handleEvent(event),
    onStatus: (status) => app.setStatus(status),
  },
  (url) => new EventSource(url),
);
stream.start();
