mod common;

use proptest::prelude::*;
use tlblock::lifting::{
    apply_blocks, apply_blocks_lti, from_blocks, in_band, in_corner, lift_lti, lift_ltv, pad_payload, to_blocks, FnTaps,
};
use tlblock::linalg::{C64, ZERO};
use tlblock::Error;

fn random_tv_taps(seed: u64, memory: usize, period: usize) -> Vec<Vec<C64>> {
    let mut r = common::rng(seed);
    (0..period)
        .map(|_| (0..=memory).map(|_| common::rand_c(&mut r)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_recursion_equals_direct_convolution(
        seed in any::<u64>(), memory in 0usize..6, extra in 1usize..12, period in 1usize..9, blocks in 1usize..6,
    ) {
        let p = memory + extra;
        let table = random_tv_taps(seed, memory, period);
        let h = |t: i64, l: usize| table[t.rem_euclid(period as i64) as usize][l];
        let taps = FnTaps { memory, f: h };
        let mut r = common::rng(seed ^ 0x55);
        let x: Vec<C64> = (0..p * blocks).map(|_| common::rand_c(&mut r)).collect();
        let (bs, partial) = to_blocks(&x, p);
        prop_assert!(!partial);
        let pairs: Vec<_> = (0..blocks as i64).map(|i| lift_ltv(&taps, p, i).unwrap()).collect();
        let got = from_blocks(&apply_blocks(&pairs, &bs).unwrap());
        let want = common::tv_convolve(h, memory, &x);
        prop_assert!(common::rel_l2(&got, &want) <= 1e-13);
    }

    #[test]
    fn lifted_matrices_respect_band_and_corner(seed in any::<u64>(), memory in 0usize..6, extra in 1usize..10, i in -5i64..5) {
        let p = memory + extra;
        let table = random_tv_taps(seed, memory, 3);
        let taps = FnTaps { memory, f: |t: i64, l: usize| table[t.rem_euclid(3) as usize][l] };
        let pair = lift_ltv(&taps, p, i).unwrap();
        pair.check_structure().unwrap();
        for k in 0..p {
            for n in 0..p {
                if in_band(k, n, memory) {
                    prop_assert_eq!(pair.h0[(k, n)], table[(i * p as i64 + k as i64).rem_euclid(3) as usize][k - n]);
                }
                if in_corner(k, n, p, memory) {
                    prop_assert_eq!(pair.h1[(k, n)], table[(i * p as i64 + k as i64).rem_euclid(3) as usize][p + k - n]);
                }
            }
        }
    }

    #[test]
    fn tall_solve_recovers_payload(seed in any::<u64>(), memory in 1usize..6, extra in 1usize..20) {
        let mut r = common::rng(seed);
        let p = memory + extra;
        let mut kernel = common::rand_kernel(&mut r, memory + 1, 1e-6);
        kernel.taps[0] += C64::new(3.0, 0.0);
        let pair = lift_lti(&kernel, p).unwrap();
        let payload = common::rand_vec(&mut r, p - memory);
        let observed = &pair.h0 * pad_payload(&payload, memory);
        let sol = pair.tall().solve(&observed).unwrap();
        prop_assert!((&sol.payload - &payload).norm() <= 1e-10 * payload.norm());
        prop_assert!(sol.residual_norm <= 1e-10 * observed.norm());
    }
}

#[test]
fn trailing_zeros_remove_interblock_interference() {
    let mut r = common::rng(2);
    let kernel = common::rand_kernel(&mut r, 4, 1e-6);
    let p = 10;
    let pair = lift_lti(&kernel, p).unwrap();
    let blocks: Vec<_> = (0..4).map(|_| pad_payload(&common::rand_vec(&mut r, p - 3), 3)).collect();
    let out = apply_blocks_lti(&pair, &blocks).unwrap();
    for (y, v) in out.iter().zip(&blocks) {
        assert!((y - &pair.h0 * v).norm() < 1e-14);
    }
}

#[test]
fn block_size_must_exceed_memory() {
    let kernel = tlblock::kernels::DtKernel::from_real(&[1.0, 0.5, 0.25], 1e-6);
    assert!(matches!(lift_lti(&kernel, 2), Err(Error::BlockTooSmall { p: 2, l: 2 })));
    assert!(lift_lti(&kernel, 3).is_ok());
}

#[test]
fn partial_last_block_is_padded() {
    let x = vec![C64::new(1.0, 0.0); 7];
    let (blocks, partial) = to_blocks(&x, 4);
    assert!(partial);
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[1][3], ZERO);
    assert_eq!(&from_blocks(&blocks)[..7], &x[..]);
}
