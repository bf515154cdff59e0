use std::collections::BTreeMap;
use std::sync::Arc;

use msms_core::codec::{
    berger_encode, berger_verify, duplication_encode, duplication_verify, parity_encode, parity_verify,
    traversal_steps, Berger, Codec, CodecKind, CostDescriptor, Duplication, Parity,
};
use msms_core::fault::{rowhammer_flip, run_attack, AttackSetup, TargetedFlip};
use msms_core::monitor::{
    verify_chain, Address, AuditEvent, ProtectedStore, ReadPolicy, StoreConfig, Strategy as Mode, Validity,
    VirtualPageId,
};
use msms_core::sim::{run_simulation, simulate, theoretical_cost, CostFormula, CostRow, SimulationConfig};
use msms_core::{BitIndex, Word};
use proptest::prelude::*;

fn word_strategy(max_width: u32) -> impl Strategy<Value = Word> {
    (1..=max_width, any::<u64>()).prop_map(|(width, bits)| Word::truncating(bits, width).unwrap())
}

fn strategy_strategy() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::None), Just(Mode::Enhanced), Just(Mode::Full)]
}

fn store(strategy: Mode, words_per_page: u32, width: u32, codec: Arc<dyn Codec>) -> ProtectedStore {
    let config = StoreConfig { words_per_page, word_width: width, strategy, ..StoreConfig::default() };
    ProtectedStore::new(config, codec).unwrap()
}

proptest! {
    #[test]
    fn flip_is_an_involution_at_distance_one(word in word_strategy(64), pos in any::<u32>()) {
        let pos = BitIndex(pos % word.width());
        let flipped = word.flip_bit(pos).unwrap();
        prop_assert_eq!(flipped.flip_bit(pos).unwrap(), word);
        prop_assert_eq!(word.hamming_distance(&flipped).unwrap(), 1);
        prop_assert_ne!(flipped.bit(pos).unwrap(), word.bit(pos).unwrap());
        prop_assert_eq!(flipped.width(), word.width());
    }

    #[test]
    fn flip_out_of_range_fails(word in word_strategy(64), extra in 0u32..1000) {
        prop_assert!(word.flip_bit(BitIndex(word.width() + extra)).is_err());
    }

    #[test]
    fn neighbors_are_distinct_single_flips(word in word_strategy(64)) {
        let neighbors: Vec<Word> = word.neighbors().collect();
        prop_assert_eq!(neighbors.len(), word.width() as usize);
        let distinct: std::collections::BTreeSet<_> = neighbors.iter().collect();
        prop_assert_eq!(distinct.len(), neighbors.len());
        for n in &neighbors {
            prop_assert_eq!(word.hamming_distance(n).unwrap(), 1);
        }
    }

    #[test]
    fn bit_strings_round_trip(word in word_strategy(64)) {
        let text = word.to_string();
        prop_assert_eq!(text.len(), word.width() as usize);
        prop_assert_eq!(text.parse::<Word>().unwrap(), word);
    }

    #[test]
    fn codecs_accept_what_they_encode(word in word_strategy(64), copies in 1u32..4) {
        prop_assert!(parity_verify(word, &parity_encode(word)).unwrap().valid);
        prop_assert!(berger_verify(word, &berger_encode(word)).unwrap().valid);
        prop_assert!(duplication_verify(word, &duplication_encode(word, copies).unwrap()).unwrap().valid);
        let dup = Duplication::new(copies).unwrap();
        for codec in [&Parity as &dyn Codec, &Berger, &dup] {
            prop_assert!(codec.verify(&word, &codec.encode(&word)).unwrap().valid);
        }
    }

    #[test]
    fn parity_sees_odd_and_misses_even_flips(word in word_strategy(64), a in any::<u32>(), b in any::<u32>()) {
        let check = parity_encode(word);
        let i = BitIndex(a % word.width());
        prop_assert!(!parity_verify(word.flip_bit(i).unwrap(), &check).unwrap().valid);
        let j = BitIndex(b % word.width());
        prop_assume!(i != j);
        let twice = word.flip_bit(i).unwrap().flip_bit(j).unwrap();
        prop_assert!(parity_verify(twice, &check).unwrap().valid);
    }

    #[test]
    fn berger_sees_any_unidirectional_error(word in word_strategy(64), mask in any::<u64>(), upward in any::<bool>()) {
        let check = berger_encode(word);
        let bits = word.bits();
        let full = if word.width() == 64 { u64::MAX } else { (1u64 << word.width()) - 1 };
        let damaged = if upward { bits | (mask & !bits & full) } else { bits & !(mask & bits) };
        prop_assume!(damaged != bits);
        let damaged = Word::new(damaged, word.width()).unwrap();
        prop_assert!(!berger_verify(damaged, &check).unwrap().valid);
    }

    #[test]
    fn duplication_sees_every_single_flip(word in word_strategy(64), pos in any::<u32>(), copies in 1u32..4) {
        let check = duplication_encode(word, copies).unwrap();
        let flipped = word.flip_bit(BitIndex(pos % word.width())).unwrap();
        prop_assert!(!duplication_verify(flipped, &check).unwrap().valid);
    }

    #[test]
    fn berger_check_width_is_logarithmic(width in 1u32..=64, bits in any::<u64>()) {
        let word = Word::truncating(bits, width).unwrap();
        let payload = berger_encode(word).payload_bits();
        prop_assert!(payload >= 1);
        prop_assert!((1u64 << payload) > width as u64);
        prop_assert!((1u64 << (payload - 1)) <= width as u64);
    }

    #[test]
    fn full_parity_flags_every_injected_single_flip(width in 1u32..=64, bits in any::<u64>(), offset in 0u32..8, bit in any::<u32>()) {
        let mut s = store(Mode::Full, 8, width, Arc::new(Parity));
        let page = s.map_page();
        let addr = Address::new(page, offset);
        s.write(addr, Word::truncating(bits, width).unwrap(), false).unwrap();
        let physical = s.physical_page_of(page).unwrap();
        let seen = rowhammer_flip(&mut s, TargetedFlip { physical_page: physical, word_offset: offset, bit: BitIndex(bit % width) }).unwrap();
        prop_assert_eq!(seen, vec![page]);
        let out = s.read(addr).unwrap();
        prop_assert_eq!(out.validity, Validity::Invalid);
        prop_assert!(out.word.is_some());
        prop_assert_eq!(s.read_with_policy(addr, ReadPolicy::SuppressOnInvalid).unwrap().word, None);
    }

    #[test]
    fn enhanced_leaves_unflagged_words_unchecked(words in prop::collection::vec(any::<u8>(), 1..16), flip in any::<bool>(), bit in 0u32..8) {
        let mut s = store(Mode::Enhanced, 16, 8, Arc::new(Parity));
        let page = s.map_page();
        for (i, w) in words.iter().enumerate() {
            s.write(Address::new(page, i as u32), Word::new(*w as u64, 8).unwrap(), false).unwrap();
        }
        if flip {
            let physical = s.physical_page_of(page).unwrap();
            rowhammer_flip(&mut s, TargetedFlip { physical_page: physical, word_offset: 0, bit: BitIndex(bit) }).unwrap();
        }
        for i in 0..words.len() as u32 {
            let addr = Address::new(page, i);
            prop_assert!(!s.flag(addr).unwrap());
            prop_assert!(s.check(addr).unwrap().is_none());
            prop_assert_eq!(s.read(addr).unwrap().validity, Validity::Unchecked);
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Write { page: usize, offset: u32, value: u8, priority: bool },
    SetPriority { page: usize, offset: u32 },
    Read { page: usize, offset: u32 },
    Dedup,
    Protect { page: usize },
    Release { page: usize },
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..3usize, 0..4u32, 0..3u8, any::<bool>())
            .prop_map(|(page, offset, value, priority)| Op::Write { page, offset, value, priority }),
        2 => (0..3usize, 0..4u32).prop_map(|(page, offset)| Op::SetPriority { page, offset }),
        2 => (0..3usize, 0..4u32).prop_map(|(page, offset)| Op::Read { page, offset }),
        2 => Just(Op::Dedup),
        1 => (0..3usize).prop_map(|page| Op::Protect { page }),
        1 => (0..3usize).prop_map(|page| Op::Release { page }),
    ]
}

fn snapshot(s: &ProtectedStore, pages: &[VirtualPageId]) -> BTreeMap<Address, (Option<Word>, bool)> {
    let mut out = BTreeMap::new();
    for &page in pages {
        let physical = s.physical_page(s.physical_page_of(page).unwrap()).unwrap();
        for offset in 0..4u32 {
            let addr = Address::new(page, offset);
            out.insert(addr, (physical.words()[offset as usize], s.flag(addr).unwrap()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flags_never_drop_and_dedup_preserves_content(strategy in strategy_strategy(), ops in prop::collection::vec(op_strategy(), 1..80)) {
        let mut s = store(strategy, 4, 8, Arc::new(Parity));
        let mut pages: Vec<VirtualPageId> = (0..3).map(|_| s.map_page()).collect();
        let mut protected = std::collections::BTreeSet::new();
        for op in ops {
            let before = snapshot(&s, &pages);
            let mut expected = before.clone();
            match op {
                Op::Write { page, offset, value, priority } => {
                    let addr = Address::new(pages[page], offset);
                    let flagged = before[&addr].1;
                    let res = s.write(addr, Word::new(value as u64, 8).unwrap(), priority);
                    prop_assert_eq!(res.is_err(), flagged && !priority);
                    if res.is_ok() {
                        expected.insert(addr, (Some(Word::new(value as u64, 8).unwrap()), flagged || priority));
                    }
                }
                Op::SetPriority { page, offset } => {
                    let addr = Address::new(pages[page], offset);
                    prop_assert_eq!(s.set_priority(addr).unwrap(), !before[&addr].1);
                    expected.get_mut(&addr).unwrap().1 = true;
                }
                Op::Read { page, offset } => {
                    let addr = Address::new(pages[page], offset);
                    match s.read(addr) {
                        Ok(out) => {
                            prop_assert_eq!(out.word, before[&addr].0);
                            prop_assert_ne!(out.validity, Validity::Invalid);
                        }
                        Err(_) => prop_assert!(before[&addr].0.is_none()),
                    }
                }
                Op::Dedup => {
                    let report = s.dedup_scan();
                    for merge in &report.merges {
                        for v in &merge.remapped {
                            prop_assert!(!protected.contains(v));
                        }
                    }
                    prop_assert_eq!(report.pages_freed, report.merges.len());
                }
                Op::Protect { page } => {
                    s.protect_page(pages[page]).unwrap();
                    protected.insert(pages[page]);
                }
                Op::Release { page } => {
                    s.release_page(pages[page]).unwrap();
                    for offset in 0..4 {
                        expected.remove(&Address::new(pages[page], offset));
                    }
                    pages[page] = s.map_page();
                    for offset in 0..4 {
                        expected.insert(Address::new(pages[page], offset), (None, false));
                    }
                }
            }
            prop_assert_eq!(snapshot(&s, &pages), expected);
            for page in &protected {
                if let Some(mapping) = s.page_table().get(*page) {
                    prop_assert_eq!(s.physical_page(mapping.physical).unwrap().refcount(), 1);
                }
            }
        }
        prop_assert!(s.verify_audit_chain().intact);
    }

    #[test]
    fn merged_pages_split_on_write(values in prop::collection::vec(0u8..4, 4), offset in 0u32..4, new in any::<u8>()) {
        let mut s = store(Mode::Full, 4, 8, Arc::new(Parity));
        let (a, b) = (s.map_page(), s.map_page());
        for (i, v) in values.iter().enumerate() {
            for page in [a, b] {
                s.write(Address::new(page, i as u32), Word::new(*v as u64, 8).unwrap(), false).unwrap();
            }
        }
        let report = s.dedup_scan();
        prop_assert_eq!(report.merges.len(), 1);
        prop_assert_eq!(s.physical_page_of(a).unwrap(), s.physical_page_of(b).unwrap());
        let word = Word::new(new as u64, 8).unwrap();
        s.write(Address::new(b, offset), word, false).unwrap();
        prop_assert_ne!(s.physical_page_of(a).unwrap(), s.physical_page_of(b).unwrap());
        prop_assert_eq!(s.read(Address::new(a, offset)).unwrap().word, Some(Word::new(values[offset as usize] as u64, 8).unwrap()));
        let out = s.read(Address::new(b, offset)).unwrap();
        prop_assert_eq!(out.word, Some(word));
        prop_assert_eq!(out.validity, Validity::Valid);
        prop_assert!(s.audit().entries().iter().any(|e| e.event == AuditEvent::CowBreak));
    }

    #[test]
    fn any_single_field_forgery_is_located(writes in prop::collection::vec((0u32..4, any::<u8>()), 1..20), pick in any::<prop::sample::Index>(), field in 0usize..6, byte in 0usize..32) {
        let mut s = store(Mode::Full, 4, 8, Arc::new(Parity));
        let page = s.map_page();
        for (offset, v) in &writes {
            if s.write(Address::new(page, *offset), Word::new(*v as u64, 8).unwrap(), *v > 200).is_ok() {
                s.read(Address::new(page, *offset)).unwrap();
            }
        }
        let log = s.audit();
        let mut entries = log.entries().to_vec();
        let i = pick.index(entries.len());
        let e = &mut entries[i];
        match field {
            0 => e.sequence += 1,
            1 => e.event = if e.event == AuditEvent::Write { AuditEvent::Merge } else { AuditEvent::Write },
            2 => e.address.page.0 ^= 1,
            3 => e.address.offset += 1,
            4 => e.digest_prev.0[byte] ^= 0x80,
            _ => e.digest_self.0[byte] ^= 0x01,
        }
        let verdict = verify_chain(log.anchor(), log.first_sequence(), &entries);
        prop_assert!(!verdict.intact);
        prop_assert_eq!(verdict.first_break, Some(i as u64));
        prop_assert_eq!(verdict.entries_checked, i);
    }

    #[test]
    fn scenario_outcomes_are_monotone_in_protection(seed in any::<u64>(), wpp in 1u32..32) {
        let run = |strategy, protect_page, priority_victim| {
            run_attack(&AttackSetup { strategy, protect_page, priority_victim, seed, words_per_page: wpp, ..AttackSetup::default() }).unwrap().0
        };
        let bare = run(Mode::None, false, false);
        prop_assert!(bare.attack_succeeded());
        for strategy in Mode::ALL {
            for priority in [false, true] {
                prop_assert!(!run(strategy, true, priority).attack_succeeded());
                let open = run(strategy, false, priority);
                prop_assert_eq!(open.attack_succeeded(), !strategy.protects(priority));
                prop_assert_eq!(open.merged, bare.merged);
            }
        }
    }

    #[test]
    fn cost_model_is_affine_in_priority_fraction(t in 1.0f64..10.0, sp in 1.0f64..10.0, bt in 1.0f64..1000.0, bs in 1.0f64..1000.0, blended in any::<bool>()) {
        let formula = if blended { CostFormula::Blended } else { CostFormula::Additive };
        let base = CostRow { time: bt, space: bs };
        let tech = CostDescriptor::multipliers(t, sp);
        let points: Vec<CostRow> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| theoretical_cost(p, &tech, base, formula).unwrap().msms)
            .collect();
        let tol = 1e-9 * (bt + bs) * (t + sp);
        for win in points.windows(3) {
            prop_assert!((win[0].time - 2.0 * win[1].time + win[2].time).abs() < tol);
            prop_assert!((win[0].space - 2.0 * win[1].space + win[2].space).abs() < tol);
        }
        prop_assert!((points[0].time - bt).abs() < tol && (points[0].space - bs).abs() < tol);
        let top = if blended { (bt * t, bs * sp) } else { (bt + bt * t, bs + bs * sp) };
        prop_assert!((points[4].time - top.0).abs() < tol && (points[4].space - top.1).abs() < tol);
    }
}

fn small_config() -> impl Strategy<Value = SimulationConfig> {
    (
        1u64..3000,
        1u32..=64,
        0.0f64..=1.0,
        0.0f64..0.05,
        any::<u64>(),
        1u32..64,
        prop_oneof![
            Just(CodecKind::Parity),
            Just(CodecKind::Berger),
            (1u32..4).prop_map(|copies| CodecKind::Duplication { copies }),
        ],
    )
        .prop_map(|(n_ops, word_width, priority_fraction, per_op_probability, seed, words_per_page, codec)| {
            SimulationConfig {
                n_ops,
                word_width,
                priority_fraction,
                per_op_probability,
                seed,
                words_per_page,
                codec,
                ..SimulationConfig::default()
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_is_deterministic(config in small_config(), strategy in strategy_strategy()) {
        let config = config.with_strategy(strategy);
        prop_assert_eq!(run_simulation(&config).unwrap(), run_simulation(&config).unwrap());
    }

    #[test]
    fn strategies_share_workload_and_order_costs(config in small_config()) {
        let runs: Vec<_> = Mode::ALL.iter().map(|&s| run_simulation(&config.with_strategy(s)).unwrap().1).collect();
        let b = traversal_steps(config.word_width);
        for ((n, e), f) in runs[0].iter().zip(&runs[1]).zip(&runs[2]) {
            prop_assert_eq!((n.priority, n.error_injected, n.error_bit), (e.priority, e.error_injected, e.error_bit));
            prop_assert_eq!((n.priority, n.error_injected, n.error_bit), (f.priority, f.error_injected, f.error_bit));
            prop_assert!(!n.detected);
            prop_assert_eq!(f.detected, f.error_injected);
            prop_assert_eq!(e.detected, e.error_injected && e.priority);
            prop_assert_eq!(n.steps, b);
            prop_assert_eq!(e.steps, if e.priority { f.steps } else { b });
        }
        if config.codec == CodecKind::Parity {
            let total = |rs: &[msms_core::sim::OperationRecord]| rs.iter().map(|r| r.steps).sum::<u64>();
            let priority = runs[1].iter().filter(|r| r.priority).count() as u64;
            prop_assert_eq!(total(&runs[1]), total(&runs[0]) + priority * (b + 2));
            prop_assert_eq!(total(&runs[2]), config.n_ops * (2 * b + 2));
        }
    }
}

#[test]
fn injection_count_matches_binomial_mean() {
    let (n, p, seeds) = (20_000u64, 5e-4, 120u64);
    let mut total = 0u64;
    for seed in 0..seeds {
        let config = SimulationConfig {
            n_ops: n,
            per_op_probability: p,
            seed,
            strategy: Mode::None,
            ..SimulationConfig::default()
        };
        total += simulate(&config).unwrap().totals.errors_injected;
    }
    let mean = total as f64 / seeds as f64;
    let expected = n as f64 * p;
    let se = (n as f64 * p * (1.0 - p)).sqrt() / (seeds as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected} +/- {}", 3.0 * se);
}

#[test]
fn flipped_bit_position_is_uniform() {
    let width = 8u32;
    let config = SimulationConfig {
        n_ops: 16_000,
        word_width: width,
        per_op_probability: 1.0,
        strategy: Mode::Full,
        seed: 2024,
        ..SimulationConfig::default()
    };
    let (_, records) = run_simulation(&config).unwrap();
    let mut counts = vec![0u64; width as usize];
    for r in &records {
        assert!(r.error_injected && r.detected);
        counts[r.error_bit.unwrap() as usize] += 1;
    }
    let expected = records.len() as f64 / width as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // chi-square, 7 degrees of freedom, 0.999 quantile
    assert!(chi2 < 24.32, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn check_zone_faults_land_in_proportion_to_bits() {
    let config = SimulationConfig {
        n_ops: 18_000,
        word_width: 8,
        per_op_probability: 1.0,
        strategy: Mode::Full,
        check_zone_injection: true,
        seed: 5,
        ..SimulationConfig::default()
    };
    let (_, records) = run_simulation(&config).unwrap();
    let check_hits = records.iter().filter(|r| r.error_bit == Some(8)).count() as f64;
    let share = check_hits / records.len() as f64;
    // one parity bit out of nine stored bits
    assert!((share - 1.0 / 9.0).abs() < 0.01, "check share {share}");
    assert!(records.iter().all(|r| r.detected));
}
