/** App shell: owns the event log, transport status, and DOM chrome.
 *
 * Events only ever append to `log`; the rendered view region is recomputed
 * from the full log each time (tiny logs, and it keeps replay equivalence
 * trivially true). Transport concerns (banner, toast, input gating) live in
 * static chrome outside the re-rendered region so typing state survives.
 */

import { Api, HttpError, StreamStatus } from "./client.js";
import { initialState, projectState, SessionView } from "./reducer.js";
import { SessionEvent } from "./types.js";
import { renderView } from "./view.js";

export interface StreamLike {
  start(): void;
  stop(): void;
}

const TOAST_MS = 4000;

export class App {
  log: SessionEvent[] = [];
  state: SessionView = initialState();
  status: StreamStatus = "connecting";
  postPending = false;

  private sceneImage: string | null = null;
  private imageVersion = 0;
  private imageFetchFor = 0;
  private toastTimer: ReturnType<typeof setTimeout> | null = null;

  private readonly view: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly conn: HTMLElement;
  private readonly toast: HTMLElement;
  private readonly input: HTMLInputElement;
  private readonly send: HTMLButtonElement;

  constructor(
    root: HTMLElement,
    private readonly api: Api,
  ) {
    root.innerHTML =
      `<header><h1>presslab</h1><span class="conn" data-status="connecting">connecting</span></header>` +
      `<div class="banner degraded" hidden>connection lost, reconnecting from the last received event</div>` +
      `<div id="view"></div>` +
      `<form class="ask">` +
      `<input class="query-input" placeholder="ask about the scene" autocomplete="off">` +
      `<button type="submit" class="send">ask</button>` +
      `</form>` +
      `<div class="toast" hidden></div>`;
    this.view = root.querySelector("#view") as HTMLElement;
    this.banner = root.querySelector(".banner") as HTMLElement;
    this.conn = root.querySelector(".conn") as HTMLElement;
    this.toast = root.querySelector(".toast") as HTMLElement;
    this.input = root.querySelector(".query-input") as HTMLInputElement;
    this.send = root.querySelector(".send") as HTMLButtonElement;

    this.view.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.closest(".refresh")) void this.refreshSceneImage();
      if (target.closest(".randomize")) void this.randomizeScene();
    });
    (root.querySelector(".ask") as HTMLFormElement).addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value.trim();
      if (text) void this.submitQuery(text);
    });
    this.render();
  }

  handleEvent(event: SessionEvent): void {
    this.log.push(event);
    this.render();
  }

  setStatus(status: StreamStatus): void {
    this.status = status;
    this.render();
  }

  /** Markup of the event-derived region; replaying the log must equal this. */
  renderSnapshot(): string {
    const image = this.imageVersion === this.state.sceneVersion ? this.sceneImage : null;
    return renderView(projectState(this.log), image);
  }

  render(): void {
    this.state = projectState(this.log);
    if (
      this.state.sceneVersion !== this.imageVersion &&
      this.imageFetchFor !== this.state.sceneVersion
    ) {
      void this.fetchSceneImage(this.state.sceneVersion);
    }
    const image = this.imageVersion === this.state.sceneVersion ? this.sceneImage : null;
    this.view.innerHTML = renderView(this.state, image);

    const disabled = this.state.busy || this.postPending;
    this.input.disabled = disabled;
    this.send.disabled = disabled;
    this.banner.hidden = this.status !== "degraded";
    this.conn.dataset.status = this.status;
    this.conn.textContent = this.status;
  }

  showToast(message: string): void {
    this.toast.textContent = message;
    this.toast.hidden = false;
    if (this.toastTimer !== null) clearTimeout(this.toastTimer);
    this.toastTimer = setTimeout(() => {
      this.toast.hidden = true;
    }, TOAST_MS);
  }

  async submitQuery(text: string): Promise<void> {
    this.postPending = true;
    this.render();
    try {
      await this.api.query(text);
      this.input.value = "";
    } catch (error) {
      if (error instanceof HttpError && error.status === 409) {
        this.showToast("a query is already executing; wait for it to finish");
      } else {
        this.showToast("query failed; is the service reachable?");
      }
    } finally {
      this.postPending = false;
      this.render();
    }
  }

  async randomizeScene(): Promise<void> {
    try {
      await this.api.randomizeScene();
      // the scene event on the stream carries the new state
    } catch (error) {
      if (error instanceof HttpError && error.status === 409) {
        this.showToast("scene is locked while a query is executing");
      } else {
        this.showToast("randomize failed; is the service reachable?");
      }
    }
  }

  async refreshSceneImage(): Promise<void> {
    await this.fetchSceneImage(this.state.sceneVersion, true);
  }

  private async fetchSceneImage(version: number, force = false): Promise<void> {
    if (!force && this.imageFetchFor === version) return;
    this.imageFetchFor = version;
    try {
      const response = await this.api.scene();
      if (this.state.sceneVersion === version) {
        this.sceneImage = `data:image/png;base64,${response.image_png_base64}`;
        this.imageVersion = version;
        this.render();
      }
    } catch {
      // leave the placeholder; the next refresh click retries
      this.imageFetchFor = force ? 0 : this.imageFetchFor;
    }
  }
}
