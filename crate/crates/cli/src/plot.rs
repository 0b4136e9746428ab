//! Optional matplotlib scripts written next to each CSV.

use std::path::Path;

use anyhow::{Context, Result};

/// What to draw from a CSV.
#[derive(Debug, Clone)]
pub struct PlotSpec<'a> {
    pub x: &'a str,
    pub y: &'a [&'a str],
    /// Column whose distinct values become separate curves.
    pub group: Option<&'a str>,
    pub log_x: bool,
    pub log_y: bool,
}

fn py_list(items: &[&str]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("{s:?}")).collect();
    format!("[{}]", quoted.join(", "))
}

pub fn script(csv_name: &str, spec: &PlotSpec) -> String {
    let group = spec.group.map_or("None".to_string(), |g| format!("{g:?}"));
    format!(
        r#"#!/usr/bin/env python3
import csv
import os
import sys
from collections import OrderedDict

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV = os.path.join(HERE, {csv:?})
X = {x:?}
Y = {y}
GROUP = {group}

with open(CSV, newline="") as fh:
    rows = list(csv.DictReader(fh))

series = OrderedDict()
for r in rows:
    key = r[GROUP] if GROUP else ""
    series.setdefault(key, []).append(r)

fig, axes = plt.subplots(len(Y), 1, figsize=(6, 3 * len(Y)), squeeze=False)
for ax, col in zip(axes[:, 0], Y):
    for key, rs in series.items():
        pts = [(float(r[X]), float(r[col])) for r in rs if r[col] != ""]
        if not pts:
            continue
        xs, ys = zip(*pts)
        ax.plot(xs, ys, label=key or None)
    ax.set_xlabel(X)
    ax.set_ylabel(col)
    ax.set_xscale({xs:?})
    ax.set_yscale({ys:?})
    if GROUP:
        ax.legend(title=GROUP, fontsize="small")
fig.tight_layout()
out = os.path.splitext(CSV)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
if "--show" in sys.argv:
    plt.show()
"#,
        csv = csv_name,
        x = spec.x,
        y = py_list(spec.y),
        group = group,
        xs = if spec.log_x { "log" } else { "linear" },
        ys = if spec.log_y { "log" } else { "linear" },
    )
}

/// Write `<csv stem>.py` beside `csv_path`.
pub fn emit(csv_path: &Path, spec: &PlotSpec) -> Result<()> {
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .context("CSV path has no file name")?;
    let py = csv_path.with_extension("py");
    std::fs::write(&py, script(name, spec)).with_context(|| format!("writing {}", py.display()))
}
