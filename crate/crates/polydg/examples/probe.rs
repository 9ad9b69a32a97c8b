use polydg::config::{MeshFamily, RunConfig};
use polydg::forms::ModelParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let family = match args.get(3).map(|s| s.as_str()).unwrap_or("nonconvex") {
        "mixed" => MeshFamily::Mixed,
        "voronoi" => MeshFamily::Voronoi,
        _ => MeshFamily::Nonconvex,
    };
    let lambda: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(90.0);
    let levels = vec![0.5, 0.25, 0.125, 0.0625];
    let cfg = RunConfig {
        example: 1,
        family,
        k,
        theta: 0.25,
        lambda: Some(lambda),
        h_levels: levels,
        tau_levels: vec![],
        h: None,
        tau: None,
        t_final: 1.0,
        params: ModelParams::default(),
        solver_tol: 1e-10,
        seed: 0,
        lloyd_iters: 3,
        zero_source: false,
        check_tau_gate: false,
        l2_order_range: None,
        h1_order_range: None,
        trials: 100,
    };
    let out = match polydg::verify::spatial_convergence(&cfg) {
        Ok(v) => v,
        Err(e) => { eprintln!("FAILED: {e}"); std::process::exit(1); }
    };
    println!("k={k} lambda={lambda}");
    println!("{}", out.table.to_markdown());
}
