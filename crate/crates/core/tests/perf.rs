use std::time::Instant;

use rtclt_core::blocks::{blockify, BlockSequence};
use rtclt_core::returns::return_times;
use rtclt_core::simulate::gen_iid;
use rtclt_core::statistics::ProcessModel;

/// Equidistributed 4-ary blocks of length 8 in which the first block, all
/// 3s, never occurs again.
fn input(blocks: usize, seed: u64) -> BlockSequence {
    let ell = 8;
    let model = ProcessModel::equidistributed(4).unwrap();
    let mut symbols = gen_iid(&model, blocks * ell, seed).unwrap().into_symbols();
    symbols[..ell].fill(3);
    for chunk in symbols[ell..].chunks_exact_mut(ell) {
        if chunk.iter().all(|&s| s == 3) {
            chunk[0] = 0;
        }
    }
    let seq = rtclt_core::SymbolSequence::new(rtclt_core::Alphabet::new(4).unwrap(), symbols).unwrap();
    blockify(&seq, ell).unwrap()
}

fn median_time(blocks: &BlockSequence, k: usize) -> f64 {
    let mut times: Vec<f64> = (0..7)
        .map(|_| {
            let start = Instant::now();
            let set = return_times(blocks, k, u64::MAX).unwrap();
            assert_eq!(set.blocks_scanned(), blocks.len());
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[3]
}

#[test]
fn return_times_scale_linearly_in_block_count() {
    let k = 500;
    let small = input(1 << 21, 1);
    let large = input(1 << 22, 2);
    let s = return_times(&small, k, u64::MAX).unwrap();
    assert_eq!(s.censored(), vec![1]);
    // Warm up caches and the allocator before timing.
    median_time(&small, k);
    let ratio = median_time(&large, k) / median_time(&small, k);
    assert!((1.6..=2.4).contains(&ratio), "time ratio {ratio}");
}
