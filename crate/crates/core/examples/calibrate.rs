use rflat::rpc::{calibrate_c1, verify_angle_lemma, Constants};

fn main() {
    for (n, m) in [(2usize, 1usize), (3, 1), (4, 2)] {
        let max_ratio = calibrate_c1(n, m, 10_000, 1).unwrap();
        let rep = verify_angle_lemma(n, m, 10_000, 1, &Constants::default()).unwrap();
        println!(
            "G({n},{m}): max_ratio={max_ratio:.6} admissible={} skipped={} violations@C1=1: {}",
            rep.admissible, rep.skipped, rep.violations
        );
    }
}
