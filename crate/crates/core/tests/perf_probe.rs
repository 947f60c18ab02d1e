use std::time::Instant;

#[test]
#[ignore]
fn probe_costs() {
    use dsgm::graphs::*;
    use dsgm::kernels::*;
    use dsgm::spectra::*;
    let k = Kernel::synthetic_pq(0.8, 0.2).unwrap();
    let t = Instant::now();
    let g = sample_dsgm(&k, 1000, 0.002, 1).unwrap();
    println!("sample n=1000 dense: {:?} edges={}", t.elapsed(), g.num_edges());
    let t = Instant::now();
    let gs = sample_dsgm(&k, 1000, 0.01, 1).unwrap();
    println!("sample n=1000 sparse: {:?} edges={} iso={}", t.elapsed(), gs.num_edges(), degree_summary(&gs).isolated);
    let op = Operator::normalized_adjacency(&g);
    let t = Instant::now();
    let dense = op.to_dense();
    let d = eig_sym(&dense).unwrap();
    println!("eig n=1000: {:?} l1={:.4}", t.elapsed(), d.eigenvalues[0]);
    let t = Instant::now();
    let s = discretize_kernel_spectrum(&k, 50.0, 4000, 2).unwrap();
    println!("kernel spectrum m=4000: {:?} l1={:.6} l2={:.6}", t.elapsed(), s.eigenvalues[0], s.eigenvalues[1]);
}
