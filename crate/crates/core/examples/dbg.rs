use collusion_core::car;
use collusion_core::tabular::Role;
fn main() {
    let b = car::generate_base_dataset(120_000, 31_337, &car::GeneratorConfig::default()).unwrap();
    let u = b.universe();
    let g = car::signal_transformation(u);
    let c4 = u.feature(7).category_id("C4").unwrap();
    let c4_el: Vec<u16> = g.signal_set(u).find(|x| x[7] == c4).unwrap();
    for seed in 0..5u64 {
        let coll = b.sample_without_replacement(25_000, seed, Role::Collective).unwrap();
        let (est, _) = coll.split(200, seed ^ 0xF00D).unwrap();
        let mut by_label = [0u32; 4];
        for (x, y) in est.iter() {
            if x == c4_el.as_slice() { by_label[y as usize] += 1; }
        }
        let total_insig = est.iter().filter(|(x, _)| g.in_signal_set(x)).count();
        println!("seed {seed}: est rows at C4 element {:?}, in-signal total {total_insig}", by_label);
    }
}
