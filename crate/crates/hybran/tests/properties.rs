use hybran::dynamics::stream_rng;
use hybran::reach::step_reach;
use hybran::{
    interval_forward, split, Architecture, HybridAutomaton, HyperRect, MergePolicy, NeuralNet, Partition, ReachConfig,
};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = (f64, f64)> {
    (-5.0f64..5.0, 0.0f64..4.0).prop_map(|(c, w)| (c - w / 2.0, c + w / 2.0))
}

fn rect2() -> impl Strategy<Value = HyperRect> {
    (interval(), interval()).prop_map(|(a, b)| HyperRect::from_bounds(&[a, b]).unwrap())
}

fn partition2() -> impl Strategy<Value = Partition> {
    (1usize..5, 1usize..5).prop_map(|(n1, n2)| {
        Partition::new(HyperRect::from_bounds(&[(-4.0, 4.0), (-3.0, 3.0)]).unwrap(), &[n1, n2]).unwrap()
    })
}

fn automaton(p: Partition, seed: u64) -> HybridAutomaton {
    let mut rng = stream_rng(seed, 0);
    let arch = Architecture::shallow(3, 5, 2);
    let nets = (0..p.len()).map(|_| NeuralNet::xavier(&arch, &mut rng)).collect();
    HybridAutomaton::assemble(p, nets, &[], HyperRect::from_bounds(&[(-0.5, 0.5)]).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn cells_tile_the_domain(p in partition2()) {
        let vol: f64 = p.cells().iter().map(HyperRect::volume).sum();
        prop_assert!((vol - p.domain().volume()).abs() <= 1e-9 * p.domain().volume());
        for (q, c) in p.cells().iter().enumerate() {
            prop_assert_eq!(p.index_of(&p.multi_index(q)), q);
            prop_assert_eq!(p.locate(&c.center()).unwrap().cell, q);
        }
    }

    #[test]
    fn located_cell_is_nearest(p in partition2(), x in -6.0f64..6.0, y in -5.0f64..5.0) {
        let loc = p.locate(&[x, y]).unwrap();
        let d = p.cell(loc.cell).distance_sq(&[x, y]);
        prop_assert!(p.cells().iter().all(|c| d <= c.distance_sq(&[x, y])));
        prop_assert_eq!(loc.exterior, !p.domain().contains(&[x, y]));
    }

    #[test]
    fn intersection_is_contained_in_both(a in rect2(), b in rect2()) {
        match a.intersect(&b).unwrap() {
            Some(i) => {
                prop_assert!(a.contains_rect(&i) && b.contains_rect(&i));
            }
            None => {
                let disjoint = (0..2).any(|k| a.hi()[k] < b.lo()[k] || b.hi()[k] < a.lo()[k]);
                prop_assert!(disjoint);
            }
        }
        let hull = HyperRect::bounding_box([&a, &b]).unwrap();
        prop_assert!(hull.contains_rect(&a) && hull.contains_rect(&b));
    }

    #[test]
    fn split_conserves_volume_and_covers(r in rect2(), p in partition2(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let out = split(&r, &p).unwrap();
        let total: f64 = out.fragments.iter().map(|f| f.rect.volume()).sum();
        prop_assert!((total - r.volume()).abs() <= 1e-9 * r.volume().max(1e-300));
        for f in &out.fragments {
            prop_assert!(r.contains_rect(&f.rect));
        }
        let x = [r.lo()[0] + s * (r.hi()[0] - r.lo()[0]), r.lo()[1] + t * (r.hi()[1] - r.lo()[1])];
        let q = p.locate(&x).unwrap().cell;
        prop_assert!(out.fragments.iter().any(|f| f.cell == q && f.rect.contains(&x)));
    }

    #[test]
    fn interval_bounds_are_sound_and_monotone(seed in any::<u64>(), r in rect2(), u in -1.0f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mut rng = stream_rng(seed, 0);
        let net = NeuralNet::xavier(&Architecture::shallow(3, 8, 2), &mut rng);
        let outer = r.product(&HyperRect::from_bounds(&[(u - 0.5, u + 0.5)]).unwrap());
        let x = [r.lo()[0] + s * (r.hi()[0] - r.lo()[0]), r.lo()[1] + t * (r.hi()[1] - r.lo()[1]), u];
        let inner = HyperRect::new(
            vec![r.lo()[0], x[1], u - 0.25],
            vec![x[0], r.hi()[1], u],
        ).unwrap();
        let big = interval_forward(&net, &outer).unwrap();
        let y = net.forward(&x).unwrap();
        prop_assert!(big.contains(&y));
        prop_assert!(big.contains_rect(&interval_forward(&net, &inner).unwrap()));
        let point = interval_forward(&net, &HyperRect::point(&x).unwrap()).unwrap();
        prop_assert_eq!(point.lo(), y.as_slice());
        prop_assert_eq!(point.hi(), y.as_slice());
    }

    #[test]
    fn exact_union_is_inside_per_cell_merge(p in partition2(), r in rect2(), seed in any::<u64>()) {
        let h = automaton(p, seed);
        let frags = split(&r, h.partition()).unwrap().fragments;
        let u = h.input_box().clone();
        let mut cfg = ReachConfig::new(1, u.clone());
        let merged = step_reach(&h, &frags, &u, &cfg).unwrap().fragments;
        cfg.merge = MergePolicy::ExactUnion;
        let exact = step_reach(&h, &frags, &u, &cfg).unwrap().fragments;
        for e in &exact {
            prop_assert!(merged.iter().any(|m| m.cell == e.cell && m.rect.contains_rect(&e.rect)));
        }
        let cells: std::collections::BTreeSet<usize> = exact.iter().map(|f| f.cell).collect();
        prop_assert_eq!(cells.len(), merged.len());
    }

    #[test]
    fn json_round_trips(p in partition2(), r in rect2(), seed in any::<u64>()) {
        let back: HyperRect = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(&back, &r);
        let back: Partition = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(&back, &p);
        let h = automaton(p, seed);
        let back = HybridAutomaton::from_json(&h.to_json()).unwrap();
        prop_assert_eq!(back, h);
    }
}
