use cmhi::datagen::gen_design;
use cmhi::rates::epsilon_lower_bound_glm;
use cmhi::spd::SpdMatrix;
use cmhi::stream::root_stream;
use cmhi::targets::Dataset;
use nalgebra::DVector;
use std::time::Instant;

fn main() {
    let cov = SpdMatrix::identity(1000);
    let mut total = 0.0;
    for seed in 0..6u64 {
        let t0 = Instant::now();
        let x = gen_design(1000, 1000, 1.0, &mut root_stream(seed));
        let data = Dataset::new(x, DVector::zeros(1000)).unwrap();
        let b = epsilon_lower_bound_glm(&data, 1.0, &cov, 0.25).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        total += dt;
        println!("seed={seed} lambda={:.4} time={:.2}s", b.lambda_max, dt);
    }
    println!("avg {:.2}s", total / 6.0);
}
