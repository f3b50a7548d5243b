mod common;

use common::random_irreducible;
use nuexp::coding::*;
use nuexp::orbit::{default_v_threshold, random_orbit};
use nuexp::sft::*;
use nuexp::stream_rng;
use nuexp::torus::*;
use proptest::prelude::*;
use rand::Rng;

fn doubling() -> ItineraryMap {
    ItineraryMap::new(&TorusMap::linear(&[2]).unwrap()).unwrap()
}

#[test]
fn doubling_itineraries_are_binary_digits() {
    let im = doubling();
    let w = itinerary(&im, &[1.0 / 3.0, 0.0], 12).unwrap();
    assert_eq!(w, [0, 1].repeat(6));
    let mut rng = stream_rng(4, 0);
    for _ in 0..1000 {
        let x: f64 = rng.random();
        // scaling by powers of two is exact in binary floating point
        let digits: Vec<usize> = (1..=30).map(|k| ((x * 2f64.powi(k)).floor() as u64 % 2) as usize).collect();
        assert_eq!(itinerary(&im, &[x, 0.0], 30).unwrap(), digits);
    }
    assert!(matches!(itinerary(&im, &[0.5, 0.0], 3), Err(CodingError::BoundaryHit { step: 0, .. })));
}

#[test]
fn fixed_point_codes_to_the_last_symbol() {
    let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    let d = im.d();
    assert_eq!(itinerary(&im, &[0.0, 0.0], 50).unwrap(), vec![d - 1; 50]);
}

/// Marks every `(i, j)` with a grid point of `int Rᵢ` landing in `Rⱼ`.
fn sampled_matrix(f: &TorusMap, p: &MarkovPartition, per_axis: usize) -> Vec<Vec<u8>> {
    let d = p.len();
    let mut seen = vec![vec![0u8; d]; d];
    for s in 0..d {
        let idx = p.axis_indices(s);
        let side = |k: usize| p.axes[k].interval_f64(idx[k]);
        let (x0, x1) = side(0);
        let (y0, y1) = if p.dim() == 2 { side(1) } else { (0.0, 0.0) };
        for i in 0..per_axis {
            for k in 0..per_axis {
                let u = (i as f64 + 0.5) / per_axis as f64;
                let v = (k as f64 + 0.5) / per_axis as f64;
                let x = [wrap(x0 + u * (x1 - x0)), wrap(y0 + v * (y1 - y0))];
                if let Some(t) = p.locate(&f.eval(&x)) {
                    seen[s][t] = 1;
                }
            }
        }
    }
    seen
}

#[test]
fn induced_matrix_matches_dense_sampling() {
    let flagship = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    let linear = TorusMap::linear(&[2, 4]).unwrap();
    assert_eq!(sampled_matrix(&linear, &flagship.partition, 48), flagship.matrix.rows());
    // the deformation leaves the induced matrix alone
    assert_eq!(sampled_matrix(&flagship.map, &flagship.partition, 48), flagship.matrix.rows());
    let grid = ItineraryMap::new(&linear).unwrap();
    assert_eq!(sampled_matrix(&linear, &grid.partition, 16), grid.matrix.rows());
    let circle = ItineraryMap::new(&TorusMap::new(&MapConfig { eigenvalues: vec![3], ..MapConfig::flagship() }).unwrap()).unwrap();
    assert_eq!(sampled_matrix(&circle.map, &circle.partition, 200), circle.matrix.rows());
}

#[test]
fn flagship_coding_is_mixing() {
    let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    assert_eq!(check_transitivity(&im.matrix), (true, true, 1));
    let h = topological_entropy(&im.matrix).unwrap();
    assert!((h - 8f64.ln()).abs() < 1e-10);
}

#[test]
fn transitivity_examples() {
    assert_eq!(check_transitivity(&TransitionMatrix::full_shift(3)), (true, true, 1));
    let swap = TransitionMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
    assert_eq!(check_transitivity(&swap), (true, false, 2));
    assert_eq!(check_transitivity(&TransitionMatrix::golden_mean()), (true, true, 1));
    let split = TransitionMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
    assert!(!check_transitivity(&split).0);
}

#[test]
fn doubling_cylinders() {
    let im = doubling();
    let mut rng = stream_rng(6, 0);
    for n in 1..=40 {
        let w: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let c = cylinder_box(&im, &w).unwrap();
        // the left endpoint spells the word in binary; dyadics are exact
        // floats, so the reported side is that arc widened by one ulp
        let left: f64 = w.iter().enumerate().map(|(k, &b)| b as f64 * 2f64.powi(-(k as i32) - 1)).sum();
        let right = left + 2f64.powi(-n);
        assert_eq!(c.sides[0], [left.next_down(), right.next_up()]);
    }
}

#[test]
fn cylinders_at_the_neutral_point_do_not_shrink() {
    let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    let a = im.map.alpha().unwrap();
    // α has a repelling fixed point u* where ψ(u*/ε) = (λ₁−1)/(λ₁−s)
    let target = (2.0 - 1.0) / (2.0 - a.slope());
    let t = common::bisect(|t| 1.0 - 3.0 * t * t + 2.0 * t * t * t - target, 0.0, 1.0);
    let u_star = t * a.eps();
    assert!((a.value(u_star) - u_star).abs() < 1e-12);
    let d = im.d();
    let mut last = f64::INFINITY;
    for n in [2, 5, 10, 20, 40, 80] {
        let c = cylinder_box(&im, &vec![d - 1; n]).unwrap();
        let side = c.sides[0][1] - c.sides[0][0];
        assert!(side >= 2.0 * u_star && side <= last + 1e-12, "n={n}: {side}");
        last = side;
        let x2 = c.sides[1][1] - c.sides[1][0];
        assert!((x2 - (2.0 / 9.0) * 4f64.powi(1 - n as i32)).abs() < 1e-15);
    }
    // the linear model squeezes the same word to the point
    let lin = ItineraryMap::new(&TorusMap::linear(&[2, 4]).unwrap()).unwrap();
    assert!(cylinder_box(&lin, &[0; 20]).unwrap().diameter < 1e-5);
}

#[test]
fn cylinder_measures_sum_to_one() {
    let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    let mu = parry_measure(&im.matrix).unwrap();
    for n in 1..=3 {
        let total: f64 = admissible_words(&im.matrix, n).iter().map(|w| mu.cylinder_measure(w)).sum();
        assert!((total - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn gibbs_extremes_stabilize() {
    let mut rng = stream_rng(12, 0);
    for trial in 0..8 {
        let d = 2 + trial % 2;
        let a = random_irreducible(&mut rng, d, 0.5);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let phi = LocallyConstantPotential::from_state_values(&a, &v).unwrap();
        let p = pressure(&a, &phi).unwrap();
        let mu = equilibrium_markov(&a, &phi).unwrap();
        let s8 = gibbs_ratio_scan(&a, &mu, &phi, p, 8).unwrap();
        let s12 = gibbs_ratio_scan(&a, &mu, &phi, p, 12).unwrap();
        assert!((s12.min_ratio / s8.min_ratio - 1.0).abs() < 0.05);
        assert!((s12.max_ratio / s8.max_ratio - 1.0).abs() < 0.05);
        let (lo, hi) = gibbs_bounds(&a, &phi).unwrap();
        assert!(s12.min_ratio >= lo * (1.0 - 1e-9) && s12.max_ratio <= hi * (1.0 + 1e-9));
    }
}

#[test]
fn bernoulli_equilibrium_is_exactly_gibbs() {
    let a = TransitionMatrix::full_shift(2);
    let phi = LocallyConstantPotential::from_state_values(&a, &[2f64.ln(), 0.0]).unwrap();
    let mu = equilibrium_markov(&a, &phi).unwrap();
    let rows = gibbs_scan_rows(&a, &mu, &phi, 3f64.ln(), 10, usize::MAX).unwrap();
    assert_eq!(rows.len(), (1..=10).map(|n| 1 << n).sum::<usize>());
    assert!(rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-12));
}

#[test]
fn empirical_measure_of_doubling_orbits_is_near_parry() {
    let im = doubling();
    let t = random_orbit(&im.map, 200_000, 5, 0, default_v_threshold(&im.map)).unwrap();
    let e = empirical_measure(&im, &t).unwrap();
    assert_eq!(e.visits.iter().sum::<u64>(), 200_001);
    let parry = parry_measure(&im.matrix).unwrap();
    assert!(e.measure.max_entry_diff(&parry) < 0.01);
    assert!(e.unvisited.is_empty());
}

#[test]
fn flagship_orbits_respect_the_induced_matrix() {
    let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
    let t = random_orbit(&im.map, 100_000, 2, 0, default_v_threshold(&im.map)).unwrap();
    let e = empirical_measure(&im, &t).unwrap();
    for i in 0..im.d() {
        for j in 0..im.d() {
            if e.transitions[i * im.d() + j] > 0 {
                assert!(im.matrix.allowed(i, j));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn itinerary_semiconjugacy(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
        let n = 25;
        if let (Ok(w), Ok(v)) = (itinerary(&im, &[x, y], n), itinerary(&im, &im.map.eval(&[x, y]), n - 1)) {
            prop_assert_eq!(&w[1..], &v[..]);
            prop_assert!(im.matrix.is_admissible(&w));
        }
    }

    #[test]
    fn cylinder_enclosures_contain_their_points(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..30) {
        let im = ItineraryMap::new(&TorusMap::flagship()).unwrap();
        // start inside the deformed rectangle half of the time
        let p = if n % 2 == 0 { [wrap(0.3 * (x - 0.5)), wrap(0.2 * (y - 0.5))] } else { [x, y] };
        if let Ok(w) = itinerary(&im, &p, n) {
            let c = cylinder_box(&im, &w).unwrap();
            for i in 0..2 {
                let [lo, hi] = c.sides[i];
                let lifted = if p[i] < lo { p[i] + 1.0 } else { p[i] };
                prop_assert!(lo <= lifted && lifted <= hi, "axis {} {:?} {:?}", i, p, c.sides);
            }
        }
    }
}
