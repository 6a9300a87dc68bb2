//! A matplotlib script that renders the CSV outputs of a run.

/// CSV files available next to the script.
pub struct Inputs {
    pub wall: Option<String>,
    pub decay: Option<String>,
    pub path: Option<String>,
    pub trajectory: Option<String>,
}

fn py_str(s: &Option<String>) -> String {
    match s {
        Some(name) => format!("{name:?}"),
        None => "None".into(),
    }
}

pub fn script(inputs: &Inputs) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Renders the outputs of a notchwall run next to this file into plots.png.
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
WALL = {wall}
DECAY = {decay}
PATH = {path}
TRAJECTORY = {trajectory}


def columns(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.DictReader(f))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}} if rows else {{}}


panels = [p for p in (WALL, WALL, DECAY, PATH, TRAJECTORY) if p]
fig, axes = plt.subplots(len(panels), 1, figsize=(7, 3 * len(panels)), squeeze=False)
axes = iter(axes[:, 0])

if WALL:
    w = columns(WALL)
    ax = next(axes)
    ax.plot(w["x"], w["theta"])
    ax.set_xlabel("x")
    ax.set_ylabel("theta")
    ax = next(axes)
    ax.plot(w["x"], w["defect"])
    ax.set_xlabel("x")
    ax.set_ylabel("theta'^2 - cos^2 theta")
if DECAY:
    d = columns(DECAY)
    ax = next(axes)
    ax.semilogy(d["x"], d["gap"], label="||theta| - pi/2|")
    ax.semilogy(d["x"], d["envelope"], "--", label="pi exp(-|y(x)|)")
    ax.set_xlabel("x")
    ax.legend()
if PATH:
    p = columns(PATH)
    ax = next(axes)
    ax.plot(p["lambda"], p["energy"])
    ax.axhline(2.0, color="gray", linestyle=":")
    ax.set_xlabel("lambda")
    ax.set_ylabel("energy")
if TRAJECTORY:
    t = columns(TRAJECTORY)
    ax = next(axes)
    ax.semilogy(t["t"], [max(v, 1e-16) for v in t["distance_mod_rotation"]])
    ax.set_xlabel("t")
    ax.set_ylabel("distance to wall")

fig.tight_layout()
fig.savefig(os.path.join(HERE, "plots.png"), dpi=120)
"#,
        wall = py_str(&inputs.wall),
        decay = py_str(&inputs.decay),
        path = py_str(&inputs.path),
        trajectory = py_str(&inputs.trajectory),
    )
}
