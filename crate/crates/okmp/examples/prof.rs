use okmp::ffield::{seeded_rng, PrimeField};
use okmp::ortholin::gen_orthogonal_system;
use std::time::Instant;

fn main() {
    let field = PrimeField::default_field();
    // Raw mul throughput baseline.
    let a0 = field.elem(123456789);
    let mut acc = field.elem(987654321);
    let t = Instant::now();
    for _ in 0..100_000_000u64 {
        acc = acc * a0;
    }
    println!("1e8 muls: {:?} ({acc:?})", t.elapsed());

    for (m, n) in [(500usize, 250usize), (1000, 500)] {
        let mut rng = seeded_rng(1);
        let t = Instant::now();
        let sys = gen_orthogonal_system(&field, m, n, &mut rng).unwrap();
        println!("gen({m},{n}): {:?} (len {})", t.elapsed(), sys.len());
    }
}
