//! Markdown and SVG rendering of run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use driftlab_core::verify::CheckStatus;

use crate::elements::{NormSeries, RunManifest};
use crate::LabError;

/// Minimal polyline plot. Deterministic output, no external assets.
pub fn svg_line_plot(title: &str, xs: &[f64], ys: &[f64], log_x: bool, log_y: bool) -> String {
    let (w, h, ml, mb) = (640.0, 400.0, 60.0, 40.0);
    let tx = |v: f64| if log_x { v.max(1e-300).log10() } else { v };
    let ty = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let fxs: Vec<f64> = xs.iter().map(|&v| tx(v)).collect();
    let fys: Vec<f64> = ys.iter().map(|&v| ty(v)).collect();
    let (x0, x1) = bounds(&fxs);
    let (y0, y1) = bounds(&fys);
    let sx = (w - ml - 20.0) / (x1 - x0).max(1e-12);
    let sy = (h - mb - 30.0) / (y1 - y0).max(1e-12);
    let mut pts = String::new();
    for (a, b) in fxs.iter().zip(&fys) {
        let px = ml + (a - x0) * sx;
        let py = h - mb - (b - y0) * sy;
        pts.push_str(&format!("{px:.2},{py:.2} "));
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n",
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>\n",
            "<text x=\"{ml}\" y=\"{ybot}\" font-family=\"monospace\" font-size=\"10\">",
            "x: [{x0:.3e}, {x1:.3e}]{lx}  y: [{y0:.3e}, {y1:.3e}]{ly}</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        tx = ml,
        title = title,
        pts = pts.trim_end(),
        ml = ml,
        ybot = h - 10.0,
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1,
        lx = if log_x { " (log10)" } else { "" },
        ly = if log_y { " (log10)" } else { "" },
    )
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() && lo < hi {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    }
}

fn series_svg_name(series: &NormSeries) -> String {
    format!("{}.svg", series.name.replace([' ', '/'], "_"))
}

/// Renders the pass/fail matrix, the per-element summaries, and one SVG per
/// recorded norm series. Returns `(markdown, [(file name, svg body)])`.
pub fn render(manifests: &[RunManifest]) -> (String, Vec<(String, String)>) {
    let mut md = String::new();
    md.push_str("# Verification report\n\n");

    // Pass/fail matrix per theorem.
    let mut matrix: BTreeMap<&'static str, (usize, usize, usize)> = BTreeMap::new();
    for m in manifests {
        for r in &m.reports {
            let entry = matrix.entry(r.theorem.as_str()).or_default();
            match r.status {
                CheckStatus::Passed => entry.0 += 1,
                CheckStatus::EstimateFailed => entry.1 += 1,
                CheckStatus::HypothesisFailed => entry.2 += 1,
            }
        }
    }
    md.push_str("## Estimate matrix\n\n");
    md.push_str("| theorem | passed | estimate failures | hypothesis failures |\n");
    md.push_str("|---|---:|---:|---:|\n");
    for (thm, (p, e, hy)) in &matrix {
        md.push_str(&format!("| `{thm}` | {p} | {e} | {hy} |\n"));
    }
    md.push('\n');

    let mut svgs = Vec::new();
    for m in manifests {
        md.push_str(&format!("## Element `{}`\n\n", m.element));
        md.push_str(&format!(
            "- reports: {} ({} passed)\n- validations: {} ({} passed)\n- wall clock: {:.2}s\n",
            m.reports.len(),
            m.reports.iter().filter(|r| r.passed).count(),
            m.validations.len(),
            m.validations.iter().filter(|v| v.passed).count(),
            m.wall_clock_secs,
        ));
        if m.fp_mass_deviation > 0.0 {
            md.push_str(&format!(
                "- max Fokker-Planck mass deviation: {:.3e}\n",
                m.fp_mass_deviation
            ));
        }
        for v in &m.validations {
            if !v.passed {
                md.push_str(&format!(
                    "- FAILED validation `{}`: measured {:.6e} vs bound {:.6e} ({})\n",
                    v.name, v.measured, v.bound, v.details
                ));
            }
        }
        for r in &m.reports {
            if r.status == CheckStatus::HypothesisFailed {
                md.push_str(&format!(
                    "- hypothesis failure in `{}` ({}): {}\n",
                    r.theorem.as_str(),
                    r.label,
                    r.notes.join("; ")
                ));
            } else if !r.passed {
                md.push_str(&format!(
                    "- FAILED `{}` ({}): lhs {:.6e} > rhs {:.6e}\n",
                    r.theorem.as_str(),
                    r.label,
                    r.lhs,
                    r.rhs
                ));
            }
        }
        for s in &m.norm_series {
            let name = series_svg_name(s);
            let log_plot = s.name.contains("kink");
            let finite: Vec<(f64, f64)> = s
                .times
                .iter()
                .zip(&s.values)
                .filter(|(t, v)| t.is_finite() && v.is_finite())
                .map(|(t, v)| (*t, *v))
                .collect();
            let xs: Vec<f64> = finite.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = finite.iter().map(|p| p.1).collect();
            svgs.push((
                name.clone(),
                svg_line_plot(&s.name, &xs, &ys, log_plot, log_plot),
            ));
            md.push_str(&format!("- ![{}]({})\n", s.name, name));
        }
        md.push('\n');
    }
    (md, svgs)
}

/// Loads every `manifest.json` under `dir` (one level of element folders),
/// renders, and writes `report.md` plus the SVGs next to it. Missing or
/// unreadable manifests are listed and skipped.
pub fn render_dir(dir: &Path) -> Result<(String, usize), LabError> {
    let mut manifests = Vec::new();
    let mut missing = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok()).collect();
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let p = entry.path().join("manifest.json");
        if p.exists() {
            match std::fs::read_to_string(&p)
                .map_err(LabError::from)
                .and_then(|s| serde_json::from_str::<RunManifest>(&s).map_err(LabError::from))
            {
                Ok(m) => {
                    // Referenced trajectory files must exist with matching
                    // content hashes.
                    for f in &m.trajectory_files {
                        let tp = entry.path().join(&f.path);
                        match std::fs::read(&tp) {
                            Ok(bytes) => {
                                let h = format!("{:016x}", driftlab_core::io::fnv1a(&bytes));
                                if h != f.fnv1a {
                                    missing.push(format!(
                                        "{}: hash mismatch ({} recorded, {h} on disk)",
                                        tp.display(),
                                        f.fnv1a
                                    ));
                                }
                            }
                            Err(e) => missing.push(format!("{}: {e}", tp.display())),
                        }
                    }
                    manifests.push(m);
                }
                Err(e) => missing.push(format!("{}: {e}", p.display())),
            }
        } else if entry.path().is_dir() {
            missing.push(format!("{}: no manifest.json", entry.path().display()));
        }
    }
    let (mut md, svgs) = render(&manifests);
    if !missing.is_empty() {
        md.push_str("## Missing manifests\n\n");
        for m in &missing {
            md.push_str(&format!("- {m}\n"));
        }
    }
    std::fs::write(dir.join("report.md"), &md)?;
    let n = svgs.len();
    for (name, body) in svgs {
        std::fs::write(dir.join(name), body)?;
    }
    Ok((md, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_plot_is_well_formed() {
        let svg = svg_line_plot("test", &[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0], false, false);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn svg_plot_handles_degenerate_input() {
        let svg = svg_line_plot("flat", &[1.0], &[2.0], true, true);
        assert!(svg.contains("svg"));
    }
}
