//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::prelude::*;

#[pymodule]
mod spwin {
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use serde::Serialize;

    use spwin_core::analysis::{self, CaseKind, LerEstimate, DEFAULT_CLOCK_NS};
    use spwin_core::engine::replay_adversarial;
    use spwin_core::experiment::{simulate as run_sim, RunSpec};
    use spwin_core::geometry::{rect_scenario, GraphType};
    use spwin_core::graph::build_graph;
    use spwin_core::io::parse_scenario;
    use spwin_core::Error;

    fn err(e: Error) -> PyErr {
        match e {
            Error::Infeasible { .. } | Error::Io(_) | Error::ResidualSyndrome(_) => PyRuntimeError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        }
    }

    fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
        let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        py.import("json")?.call_method1("loads", (s,))
    }

    fn graph_type(name: &str) -> PyResult<GraphType> {
        match name {
            "x" | "X" => Ok(GraphType::X),
            "z" | "Z" => Ok(GraphType::Z),
            _ => Err(PyValueError::new_err(format!("graph type must be 'x' or 'z', got {name:?}"))),
        }
    }

    #[pyfunction]
    fn wrong_matching_weight(d: u32, w: u32, l: u32) -> u32 {
        analysis::wrong_matching_weight(d, w, l)
    }

    #[pyfunction]
    fn min_confusable_l(d: u32, w: u32) -> Option<u32> {
        analysis::min_confusable_l(d, w)
    }

    #[pyfunction]
    fn bits_per_defect(d: u32) -> PyResult<u32> {
        if d < 2 {
            return Err(PyValueError::new_err("d must be at least 2"));
        }
        Ok(analysis::bits_per_defect(d))
    }

    /// Link cost for a mean defect count, or for a fixed message size.
    #[pyfunction]
    #[pyo3(signature = (d, mean_defects=None, message_bits=None, clock_ns=DEFAULT_CLOCK_NS))]
    fn comm_cost<'py>(
        py: Python<'py>,
        d: u32,
        mean_defects: Option<f64>,
        message_bits: Option<u32>,
        clock_ns: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        if d < 2 {
            return Err(PyValueError::new_err("d must be at least 2"));
        }
        let r = match (mean_defects, message_bits) {
            (_, Some(b)) => analysis::comm_cost_bits(d, b, clock_ns),
            (Some(m), None) => analysis::comm_cost(d, m, clock_ns),
            (None, None) => return Err(PyValueError::new_err("give mean_defects or message_bits")),
        };
        to_py(py, &r)
    }

    #[pyfunction]
    #[pyo3(signature = (failures, shots, z=analysis::stats::Z95))]
    fn wilson_interval(failures: u64, shots: u64, z: f64) -> (f64, f64) {
        analysis::wilson_interval(failures, shots, z)
    }

    /// Builds and replays a confusion string on the two-window layout.
    #[pyfunction]
    #[pyo3(signature = (d, w, edge="short"))]
    fn adversarial<'py>(py: Python<'py>, d: u32, w: u32, edge: &str) -> PyResult<Bound<'py, PyAny>> {
        let kind = match edge {
            "short" => CaseKind::Short,
            "long" => CaseKind::Long,
            _ => return Err(PyValueError::new_err("edge must be 'short' or 'long'")),
        };
        let case = analysis::generate_confusion_string(d, w, kind).map_err(err)?;
        let report = replay_adversarial(&case).map_err(err)?;
        to_py(py, &serde_json::json!({"case": case, "report": report}))
    }

    /// Monte Carlo on the two-window rectangle, or on a scenario given as
    /// JSON text. Returns shots, per-cut failures with Wilson intervals, and
    /// per-link artificial defect means.
    #[pyfunction]
    #[pyo3(signature = (d, w, p, shots, seed=0, graph="x", scenario_json=None))]
    fn simulate<'py>(
        py: Python<'py>,
        d: u32,
        w: u32,
        p: f64,
        shots: u64,
        seed: u64,
        graph: &str,
        scenario_json: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let gt = graph_type(graph)?;
        let s = match scenario_json {
            Some(j) => parse_scenario(j).map_err(err)?.0,
            None => rect_scenario(d, w, d).map_err(err)?,
        };
        let g = build_graph(&s.patch, &s.cuts_for(gt), gt, s.config.rounds, p).map_err(err)?;
        let r = py.detach(|| run_sim(&g, Some(&s.config), &RunSpec::new(p, shots, seed))).map_err(err)?;
        let per_cut = |c: &Option<spwin_core::experiment::DecoderCounts>| {
            let c = c.as_ref().expect("both decoders run");
            g.cuts
                .iter()
                .zip(&c.failures)
                .map(|(cut, &f)| (cut.cut.label.clone(), LerEstimate::new(f, r.shots)))
                .collect::<std::collections::BTreeMap<_, _>>()
        };
        let links: std::collections::BTreeMap<String, f64> =
            r.histograms.keys().map(|&(a, b)| (format!("{a}->{b}"), r.mean_defects((a, b)))).collect();
        to_py(
            py,
            &serde_json::json!({
                "shots": r.shots,
                "windowed": per_cut(&r.windowed),
                "global": per_cut(&r.global),
                "mean_defects": links,
            }),
        )
    }

    /// Layout violations of a scenario given as JSON text, as strings.
    #[pyfunction]
    fn validate(scenario_json: &str) -> PyResult<Vec<String>> {
        let (s, _) = parse_scenario(scenario_json).map_err(err)?;
        Ok(spwin_core::geometry::validate(&s).iter().map(|v| v.to_string()).collect())
    }

    #[pyfunction]
    fn check_two_colorable(cells: Vec<[i32; 2]>, tile: u32) -> PyResult<bool> {
        let cells = cells.into_iter().map(|[x, y]| spwin_core::geometry::Cell::new(x, y)).collect();
        spwin_core::geometry::check_two_colorable(&cells, tile).map_err(err)
    }
}
