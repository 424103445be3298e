fn main() {
    let p = darksearch::LambdaParams::reference(0.0);
    let grid: Vec<f64> = (1..200).map(|i| i as f64 * 1e-3).collect();
    let rows = darksearch::rates::rate_table(&p, &grid).unwrap();
    for w in rows.windows(2) {
        let jump = (w[1].gamma_minus - w[0].gamma_minus).abs();
        if jump > 0.3 * (w[0].gamma_minus + w[1].gamma_minus) {
            println!("jump at {} -> {}: {:.4e} -> {:.4e} (plus: {:.4e} -> {:.4e})",
                w[0].delta, w[1].delta, w[0].gamma_minus, w[1].gamma_minus, w[0].gamma_plus, w[1].gamma_plus);
        }
    }
    for d in [0.001, 0.004, 0.0045, 0.005, 0.0055, 0.006, 0.007, 0.008] {
        let g = darksearch::rates::exact_ground_rates(&p.with_detuning(d)).unwrap();
        println!("d={d}: G-={:.5e} G+={:.5e} w-={:.3} w+={:.3}", g.gamma_minus, g.gamma_plus, g.weight_minus, g.weight_plus);
    }
}
