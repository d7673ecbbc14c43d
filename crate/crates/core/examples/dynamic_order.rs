// Model V changes dimension with w: two directions away from zero, one at
// zero. Run with `cargo run --release --example dynamic_order`.
use dpdr_core::bandwidth::rule_of_thumb;
use dpdr_core::{
    estimate_order, gen_model, trace_correlation, true_basis, KernelSpec, LadleConfig, Method, ModelId, ModelSpec,
    SlicePartition,
};

fn main() -> dpdr_core::Result<()> {
    let spec = ModelSpec::new(ModelId::V, 800, 5)?;
    let data = gen_model(&spec, 11)?;
    let y: Vec<f64> = data.y().iter().copied().collect();
    let part = SlicePartition::equal_frequency(&y, 5)?;
    let h = rule_of_thumb(&data);
    let kernel = KernelSpec::gaussian(h)?;
    let grid: Vec<Vec<f64>> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&w| vec![w]).collect();
    let config = LadleConfig::new(11).with_replicates(100);

    println!("h = {h:.3}");
    println!("{:>6} {:>6} {:>5} {:>8}", "w", "d_true", "d_hat", "r2");
    for (w, profile) in grid.iter().zip(estimate_order(&data, &part, &grid, &kernel, Method::Sir, &config)) {
        let truth = true_basis(ModelId::V, 5, w)?;
        match profile {
            Ok(p) => {
                let r2 = trace_correlation(&p.estimate.leading(truth.d_true), &truth.basis)?.r2;
                println!("{:>6} {:>6} {:>5} {:>8.3}", w[0], truth.d_true, p.d_hat, r2);
            }
            Err(e) => println!("{:>6} failed: {e}", w[0]),
        }
    }
    Ok(())
}
