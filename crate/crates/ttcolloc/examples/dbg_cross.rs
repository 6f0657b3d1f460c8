use ttcolloc::field::DenseField;
use ttcolloc::tt::TTTensor;

fn main() {
    for scale in [1.0_f64, 0.5] {
        let y = TTTensor::random_uniform(0, &[16; 4], &[3, 3, 3]).unwrap().scale(scale);
        let yd = y.to_dense().unwrap();
        let mn = yd.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = yd.as_slice().iter().cloned().fold(0.0_f64, f64::max);
        println!("scale {scale}: Y entries in [{mn:.3}, {mx:.3}]");
        let e = yd.map(|v| (-v).exp());
        for eps in [1e-8, 1e-10, 1e-12] {
            let tt = TTTensor::from_dense(&e, eps);
            println!("  exp(-Y) ranks at {eps:.0e}: {:?}", tt.ranks());
        }
        let q = DenseField::from_values(
            [16; 4],
            yd.as_slice().iter().map(|v| (-v).exp() - v * v * v).collect(),
        )
        .unwrap();
        let tt = TTTensor::from_dense(&q, 1e-12);
        println!("  G ranks at 1e-12: {:?}", tt.ranks());
    }
}
