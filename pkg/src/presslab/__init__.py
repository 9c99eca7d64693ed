"""Synthetic visuo-tactile bench.

A desk-scale sandbox that mimics a camera-plus-gel-probe rig: scenes of
pressable fruit-like objects are rendered to RGB-D, grounded from language
queries, probed with a simulated marker gel, and their hardness regressed
by a small conv-LSTM trained with a variance-guarded MSE loss.  Rankings
are validated with rank-sum tests and narrated by a template (or external
LLM) explainer.  A FastAPI service exposes the whole loop for a chat UI.
"""

__version__ = "0.1.0"
