use seisflow::imaging::toy;
use seisflow::wavekit::{self, SaveMode};
use std::time::Instant;

#[test]
#[ignore]
fn dissect_forward() {
    let spec = toy::ToySpec::default();
    let m = toy::true_model::<f32>(&spec).unwrap();
    let g = &toy::geometries(&spec)[10];
    let dt = wavekit::stable_dt(&m);
    let nt = wavekit::num_timesteps(g.record_time, dt);
    let w: Vec<f32> = wavekit::ricker(g.f0, dt, nt).unwrap();

    // A geometry with a single receiver: isolates receiver-sampling cost.
    let mut g1 = g.clone();
    g1.receiver_pos = vec![g.receiver_pos[0]];
    for (label, geom) in [("96 rx", g), ("1 rx", &g1)] {
        let t0 = Instant::now();
        let _ = wavekit::forward(&m, geom, &w, SaveMode::Interval(nt)).unwrap();
        println!("{label}: {:.2}s", t0.elapsed().as_secs_f64());
    }
}
