use cpboot::sdpa::{export_sdpa, parse_sdpa};
use cpboot_core::rational::{qf, Q};
use cpboot_core::sdp::{Direction, Pencil, PsdBlock, SdpInstance};
use proptest::prelude::*;

fn pencil(size: usize, value: BoxedStrategy<Q>) -> impl Strategy<Value = Pencil> {
    prop::collection::vec((0..size, 0..size, value), 0..=4).prop_map(|es| {
        let mut p = Pencil::default();
        for (i, j, v) in es {
            p.add(i, j, &v);
        }
        p
    })
}

fn instance(value: fn() -> BoxedStrategy<Q>) -> impl Strategy<Value = SdpInstance> {
    (1usize..=3, prop::collection::vec((1usize..=3, any::<bool>()), 1..=3), any::<bool>()).prop_flat_map(
        move |(m, shapes, maximize)| {
            let blocks: Vec<_> = shapes
                .into_iter()
                .enumerate()
                .map(|(b, (size, ground))| {
                    (pencil(size, value()), prop::collection::vec(pencil(size, value()), m)).prop_map(
                        move |(constant, coeffs)| PsdBlock {
                            label: format!("B{b}"),
                            ground_only: ground,
                            size,
                            constant,
                            coeffs,
                        },
                    )
                })
                .collect();
            (blocks, prop::collection::vec(value(), m), value()).prop_map(move |(blocks, objective, c0)| SdpInstance {
                var_names: (0..m).map(|i| format!("x[r^{i}]")).collect(),
                blocks,
                objective,
                objective_constant: c0,
                direction: if maximize { Direction::Maximize } else { Direction::Minimize },
            })
        },
    )
}

/// Dyadic rationals print exactly in 17 significant digits.
fn dyadic() -> BoxedStrategy<Q> {
    (-1000i64..=1000, 0u32..=10).prop_map(|(k, e)| qf(k, 1 << e)).boxed()
}

fn any_rational() -> BoxedStrategy<Q> {
    (-1000i64..=1000, 1i64..=997).prop_map(|(a, b)| qf(a, b)).boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dyadic_instances_survive_a_round_trip(inst in instance(dyadic)) {
        prop_assert_eq!(parse_sdpa(&export_sdpa(&inst)).unwrap(), inst);
    }

    #[test]
    fn re_export_is_byte_identical(inst in instance(any_rational)) {
        let text = export_sdpa(&inst);
        prop_assert_eq!(export_sdpa(&parse_sdpa(&text).unwrap()), text);
    }
}
