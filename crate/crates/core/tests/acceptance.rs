//! Acceptance suite: one test per criterion, each printing a PASS line once
//! all of its assertions hold (run with `--nocapture` to see them). Every
//! tolerance is pinned here.

use std::time::Instant;

use fsmodel::analysis::{declared_limits, detect_theta, ThetaConfig};
use fsmodel::cdl::{parse_compactum, parse_map, ParamValue};
use fsmodel::dynamics::{
    build_system, induced_map, verify_equivariance, verify_semiconjugacy,
};
use fsmodel::geometry::Scalar;
use fsmodel::raster::check_unshielded;
use fsmodel::relations::{
    check_fs_at_scale, collapse_continuum, collapse_thin_teeth, finest_relation, fs_relation,
    comp_relation, quotient_metric, refines, verify_collapse, ClosureConfig, CollapseCheck,
    CollapseElement, Partition,
};
use fsmodel::truncation::{truncate, Depth, TruncateOptions, TruncatedCompactum};

const COMB: &str = include_str!("../fixtures/comb.cdl");
const CANTOR: &str = include_str!("../fixtures/cantor.cdl");
const ARCCOMB: &str = include_str!("../fixtures/arccomb.cdl");
const THETA: &str = include_str!("../fixtures/theta.cdl");
const SQUARE: &str = include_str!("../fixtures/square.cdl");
const FILLED: &str = include_str!("../fixtures/filled.cdl");
const SEGMENT: &str = include_str!("../fixtures/segment.cdl");
const TWOCOMBS: &str = include_str!("../fixtures/twocombs.cdl");
const SHIFT: &str = include_str!("../fixtures/shift.mdl");

fn load(src: &str, depth: Depth, delta: Scalar) -> TruncatedCompactum {
    let spec = parse_compactum(src).unwrap();
    truncate(&spec, depth, &delta, TruncateOptions { allow_empty: true }).unwrap()
}

fn eps_grid() -> [Scalar; 3] {
    [Scalar::ratio(1, 2), Scalar::ratio(1, 4), Scalar::ratio(1, 8)]
}

#[test]
fn criterion_1_comb_finest_fs_model() {
    let started = Instant::now();
    let t = load(COMB, Depth::new(8, 8, 0), Scalar::ratio(1, 16));
    // Base bar, eight accumulating bars, one tooth per dyadic in lowest
    // terms with denominator up to 256.
    assert_eq!(t.pieces.len(), 1 + 8 + 255);
    let p = fs_relation(&t).unwrap();

    // Exactly one nondegenerate class, and it is the base bar's atom set.
    let nondeg: Vec<_> = p
        .classes()
        .filter(|(_, c)| c.geometry.diameter() > t.delta)
        .collect();
    assert_eq!(nondeg.len(), 1, "one nondegenerate class");
    let h = t.piece_by_label("H").unwrap();
    assert_eq!(nondeg[0].1.atoms, t.piece_atoms[h.id as usize]);

    let qm = quotient_metric(&t, &p);
    for eps in eps_grid() {
        let report = check_fs_at_scale(&t, &p, &qm, &eps, 8);
        assert!(report.pass, "fs quotient at eps {eps}: {:?}", report.violations);
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 30,
        "criterion 1 must finish within 30 s, took {elapsed:?}"
    );
    println!("ACCEPTANCE criterion 1: PASS (depth 8,8 fs model, {elapsed:?})");
}

#[test]
fn criterion_2_incomparability() {
    let t = load(COMB, Depth::new(8, 8, 0), Scalar::ratio(1, 16));
    let h = collapse_continuum(&t, "H").unwrap();
    let phi4 = collapse_thin_teeth(&t, 4).unwrap();
    assert!(!refines(&h, &phi4).unwrap(), "h does not refine phi4");
    assert!(!refines(&phi4, &h).unwrap(), "phi4 does not refine h");

    for p in [&h, &phi4] {
        let qm = quotient_metric(&t, p);
        for eps in eps_grid() {
            let report = check_fs_at_scale(&t, p, &qm, &eps, 8);
            assert!(report.pass, "eps {eps}: {:?}", report.violations);
        }
    }

    let identity = Partition::identity(&t);
    let qm = quotient_metric(&t, &identity);
    let report = check_fs_at_scale(&t, &identity, &qm, &Scalar::ratio(1, 2), 4);
    assert!(!report.pass, "identity fails at eps 1/2");
    let v = report
        .violations
        .iter()
        .find(|v| v.family == "Hn")
        .expect("bar family violation");
    assert_eq!(v.witness, vec!["1", "2", "3", "4"], "witness is H1..H4");
    println!("ACCEPTANCE criterion 2: PASS (h vs phi4 incomparable, identity fails with H1..H4)");
}

#[test]
fn criterion_3_theta_unshielded_consistency() {
    let deltas = [Scalar::ratio(1, 32), Scalar::ratio(1, 64)];

    let comb = load(COMB, Depth::new(4, 4, 0), Scalar::ratio(1, 16));
    assert!(detect_theta(&comb, ThetaConfig::default()).is_some(), "comb theta witness");
    let theta = load(THETA, Depth::new(0, 0, 0), Scalar::ratio(1, 4));
    assert!(detect_theta(&theta, ThetaConfig::default()).is_some(), "theta-graph witness");
    for d in &deltas {
        assert!(!check_unshielded(&comb, d).unshielded, "comb shielded at {d}");
        assert!(!check_unshielded(&theta, d).unshielded, "theta shielded at {d}");
    }
    let square = load(SQUARE, Depth::new(0, 0, 0), Scalar::ratio(1, 4));
    assert!(detect_theta(&square, ThetaConfig::default()).is_none());
    for d in &deltas {
        assert!(check_unshielded(&square, d).unshielded, "square unshielded at {d}");
    }

    // On every fixture: a theta witness implies a shielded verdict.
    let fixtures: Vec<(&str, TruncatedCompactum)> = vec![
        ("comb", comb),
        ("theta", theta),
        ("square", square),
        ("cantor", load(CANTOR, Depth::new(0, 0, 3), Scalar::one())),
        ("arccomb", load(ARCCOMB, Depth::new(0, 0, 5), Scalar::ratio(1, 4))),
        ("filled", load(FILLED, Depth::new(0, 0, 0), Scalar::ratio(1, 4))),
        ("segment", load(SEGMENT, Depth::new(0, 0, 0), Scalar::ratio(1, 4))),
        ("twocombs", load(TWOCOMBS, Depth::new(3, 3, 0), Scalar::ratio(1, 8))),
    ];
    for (name, t) in &fixtures {
        if detect_theta(t, ThetaConfig::default()).is_some() {
            for d in &deltas {
                assert!(
                    !check_unshielded(t, d).unshielded,
                    "{name}: theta witness but unshielded at {d}"
                );
            }
        }
    }
    println!("ACCEPTANCE criterion 3: PASS (theta implies shielded on every fixture)");
}

#[test]
fn criterion_4_cantor_fibers() {
    let t = load(CANTOR, Depth::new(0, 0, 6), Scalar::one());
    let fs = fs_relation(&t).unwrap();
    assert_eq!(fs.class_count(), 64, "one class per fiber");
    for (param, pid) in t.family_members("fib") {
        let atoms = &t.piece_atoms[pid as usize];
        let rep = fs.rep(atoms[0]);
        assert!(atoms.iter().all(|&a| fs.rep(a) == rep), "fiber {param} collapsed");
    }
    let comp = comp_relation(&t).unwrap();
    assert!(comp.is_identity(), "componentwise relation performs zero merges");
    assert!(refines(&comp, &fs).unwrap(), "comp refines fs");
    assert!(!comp.same_partition(&fs), "and they differ");
    println!("ACCEPTANCE criterion 4: PASS (64 fiber classes, comp strictly finer)");
}

#[test]
fn criterion_5_dynamics_word_shift() {
    let spec = parse_compactum(CANTOR).unwrap();
    let map = parse_map(SHIFT, &spec).unwrap();
    let dom = load(CANTOR, Depth::new(0, 0, 6), Scalar::one());
    let cod = load(CANTOR, Depth::new(0, 0, 5), Scalar::one());
    let s = build_system(&map, &dom, &cod).unwrap();
    let p_dom = fs_relation(&dom).unwrap();
    let p_cod = fs_relation(&cod).unwrap();

    let report = verify_equivariance(&s, &p_dom, &p_cod);
    assert!(report.pass, "{report:?}");

    let im = induced_map(&s, &p_dom, &p_cod).unwrap();
    assert_eq!(im.table.len(), 64, "64-row class table");
    // Independently constructed word-shift table.
    for (param, pid) in dom.family_members("fib") {
        let ParamValue::Word(w) = param else { unreachable!() };
        let shifted = ParamValue::Word(w.chars().skip(1).collect());
        let (_, qid) = cod
            .family_members("fib")
            .into_iter()
            .find(|(q, _)| **q == shifted)
            .unwrap();
        let dom_rep = p_dom.rep(dom.piece_atoms[pid as usize][0]);
        let cod_rep = p_cod.rep(cod.piece_atoms[qid as usize][0]);
        assert_eq!(im.table[&dom_rep], cod_rep, "row for fiber {w}");
    }
    assert!(verify_semiconjugacy(&s, &p_dom, &p_cod, &im, None).is_ok());

    // Adversarial partition: merge fibers 000000 and 110000 only.
    let f0 = dom.piece_by_label("fib:000000").unwrap().id;
    let f1 = dom.piece_by_label("fib:110000").unwrap().id;
    let mut groups: Vec<Vec<u32>> = dom
        .pieces
        .iter()
        .map(|p| dom.piece_atoms[p.id as usize].clone())
        .collect();
    let moved = groups[f1 as usize].clone();
    groups[f0 as usize].extend(moved);
    groups[f1 as usize].clear();
    let adversarial = Partition::from_groups(&dom, &groups);
    let bad = verify_equivariance(&s, &adversarial, &p_cod);
    assert!(!bad.pass, "adversarial merge must fail");
    assert!(
        !bad.into_violations.is_empty(),
        "violation reported with the offending class pair"
    );
    assert_eq!(bad.into_violations[0].images.len(), 2);
    println!("ACCEPTANCE criterion 5: PASS (shift equivariance, 64-row table, adversarial caught)");
}

#[test]
fn criterion_6_oracle_equivalence() {
    let started = Instant::now();
    let mut checked = 0usize;
    // The comb at the smallest depth is fully enumerable as well.
    {
        let t = load(COMB, Depth::new(1, 1, 0), Scalar::one());
        assert!(t.atoms.len() <= 8);
        let collapse: Vec<CollapseElement> = declared_limits(&t)
            .into_iter()
            .filter(|l| l.nondegenerate)
            .map(|l| CollapseElement { label: l.label(), geometry: l.geometry })
            .collect();
        oracle::check_instance(&t, &collapse);
        checked += 1;
    }
    for seed in 0..28u64 {
        let (t, collapse) = oracle::random_grid_instance(seed);
        oracle::check_instance(&t, &collapse);
        checked += 1;
    }
    for seed in 0..26u64 {
        let (t, collapse) = oracle::ladder_instance(seed);
        oracle::check_instance(&t, &collapse);
        checked += 1;
    }
    assert!(checked >= 50, "at least 50 randomized instances");
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 6 must finish within 60 s, took {elapsed:?}"
    );
    println!("ACCEPTANCE criterion 6: PASS ({checked} instances match the GLB oracle, {elapsed:?})");
}

#[test]
fn criterion_7_arccomb_unshielded_positive() {
    let t = load(ARCCOMB, Depth::new(0, 0, 5), Scalar::ratio(1, 4));
    assert_eq!(t.family_members("fib").len(), 32);

    let report = check_unshielded(&t, &Scalar::ratio(1, 64));
    assert!(report.unshielded, "arccomb is unshielded at 1/64");

    let fs = fs_relation(&t).unwrap();
    let nondeg: Vec<_> = fs
        .classes()
        .filter(|(_, c)| c.geometry.diameter() > t.delta)
        .collect();
    assert_eq!(nondeg.len(), 32, "exactly the 32 fibers collapse");
    for (param, pid) in t.family_members("fib") {
        let atoms = &t.piece_atoms[pid as usize];
        let rep = fs.rep(atoms[0]);
        assert!(atoms.iter().all(|&a| fs.rep(a) == rep), "fiber {param}");
        assert_eq!(fs.class(rep).atoms, *atoms, "class is exactly the fiber");
    }
    assert!(matches!(verify_collapse(&t, &fs), CollapseCheck::Pass));

    let qm = quotient_metric(&t, &fs);
    for eps in eps_grid() {
        assert!(check_fs_at_scale(&t, &fs, &qm, &eps, 8).pass);
    }

    // Collapsing only half the fibers leaves 16 disjoint tall fibers:
    // the finitely-Suslinian check must fail.
    let members = t.family_members("fib");
    let half: Vec<Vec<u32>> = members
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(_, (_, pid))| t.piece_atoms[*pid as usize].clone())
        .collect();
    let partial = Partition::from_groups(&t, &half);
    let qm = quotient_metric(&t, &partial);
    let report = check_fs_at_scale(&t, &partial, &qm, &Scalar::ratio(1, 2), 8);
    assert!(!report.pass, "half-collapsed partition fails");
    assert_eq!(report.violations[0].family, "fib");
    println!("ACCEPTANCE criterion 7: PASS (arccomb unshielded, fs collapses the fibers, partial collapse fails)");
}

#[test]
fn criterion_8_determinism_goldens() {
    let exe = env!("CARGO_BIN_EXE_fsmodel");
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/comb.cdl");
    let dir = std::env::temp_dir().join(format!("fsmodel-golden-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    let run = |tag: &str, threads: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let json = dir.join(format!("q-{tag}.json"));
        let svg = dir.join(format!("r-{tag}.svg"));
        let check = dir.join(format!("c-{tag}.json"));
        let status = std::process::Command::new(exe)
            .args([
                "quotient", fixture, "--relation", "fs", "--depth", "3,3",
                "--atom-delta", "1/8",
            ])
            .arg("--json")
            .arg(&json)
            .arg("--svg")
            .arg(&svg)
            .env("FSMODEL_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        let status = std::process::Command::new(exe)
            .args([
                "check", fixture, "--relation", "fs", "--depth", "4,4",
                "--atom-delta", "1/16", "--eps", "1/2,1/4,1/8", "--count", "8", "--fs",
            ])
            .arg("--json")
            .arg(&check)
            .env("FSMODEL_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        (
            std::fs::read(&json).unwrap(),
            std::fs::read(&svg).unwrap(),
            std::fs::read(&check).unwrap(),
        )
    };

    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "4");
    assert_eq!(a.0, b.0, "quotient JSON byte-identical across runs");
    assert_eq!(a.1, b.1, "SVG byte-identical across runs");
    assert_eq!(a.2, b.2, "check JSON byte-identical across runs");
    assert_eq!(a.0, c.0, "quotient JSON independent of thread count");
    assert_eq!(a.1, c.1, "SVG independent of thread count");
    assert_eq!(a.2, c.2, "check JSON independent of thread count");
    std::fs::remove_dir_all(&dir).ok();
    println!("ACCEPTANCE criterion 8: PASS (byte-identical outputs across runs and thread counts)");
}

// ---------------------------------------------------------------------------
// Brute-force oracle for criterion 6
// ---------------------------------------------------------------------------

mod oracle {
    use super::*;
    use fsmodel::cdl::{
        CompactumSpec, ContinuumDecl, Expr, FamilyDecl, GeoKind, GeoTemplate, LimitClause,
        ParamDomain, Var,
    };
    use fsmodel::geometry::{is_connected, PieceGeometry, Rect};
    use fsmodel::truncation::{build_adjacency, Atom, PieceInst, PieceOrigin};
    use std::collections::BTreeSet;

    /// xorshift64; deterministic instances forever.
    pub struct Rng(u64);

    impl Rng {
        pub fn new(seed: u64) -> Self {
            Rng(seed.wrapping_mul(2685821657736338717).max(1))
        }
        pub fn next(&mut self) -> u64 {
            let mut x = self.0;
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            self.0 = x;
            x
        }
        pub fn below(&mut self, n: usize) -> usize {
            (self.next() % n as u64) as usize
        }
    }

    fn assemble(
        spec: CompactumSpec,
        pieces: Vec<(PieceOrigin, Vec<Rect>)>,
    ) -> TruncatedCompactum {
        let mut atoms = Vec::new();
        let mut piece_atoms = Vec::new();
        let mut insts = Vec::new();
        for (pid, (origin, rects)) in pieces.into_iter().enumerate() {
            let mut ids = Vec::new();
            let geometry = PieceGeometry::from_parts_unchecked(rects.clone());
            for rect in rects {
                let id = atoms.len() as u32;
                atoms.push(Atom { id, rect, piece: pid as u32 });
                ids.push(id);
            }
            piece_atoms.push(ids);
            insts.push(PieceInst { id: pid as u32, origin, geometry });
        }
        let adjacency = build_adjacency(&atoms);
        TruncatedCompactum {
            spec,
            depth: Depth::new(1, 1, 1),
            delta: Scalar::one(),
            pieces: insts,
            atoms,
            adjacency,
            piece_atoms,
        }
    }

    fn const_seg(x0: i64, y0: i64, x1: i64, y1: i64) -> GeoTemplate {
        GeoTemplate {
            kind: GeoKind::Seg,
            a: (Expr::constant(Scalar::int(x0)), Expr::constant(Scalar::int(y0))),
            b: (Expr::constant(Scalar::int(x1)), Expr::constant(Scalar::int(y1))),
        }
    }

    /// Random unit segments on a lattice with 0..=3 collapse elements grown
    /// along the adjacency graph.
    pub fn random_grid_instance(seed: u64) -> (TruncatedCompactum, Vec<CollapseElement>) {
        let mut rng = Rng::new(seed.wrapping_add(11));
        let mut candidates = Vec::new();
        for i in 0..3i64 {
            for j in 0..3i64 {
                candidates.push(Rect::new(
                    Scalar::int(i),
                    Scalar::int(i + 1),
                    Scalar::int(j),
                    Scalar::int(j),
                ));
                candidates.push(Rect::new(
                    Scalar::int(i),
                    Scalar::int(i),
                    Scalar::int(j),
                    Scalar::int(j + 1),
                ));
            }
        }
        let m = 5 + rng.below(4);
        let mut rects: Vec<Rect> = Vec::new();
        while rects.len() < m {
            let r = candidates[rng.below(candidates.len())].clone();
            if !rects.contains(&r) {
                rects.push(r);
            }
        }
        let spec = CompactumSpec {
            name: "grid".into(),
            continua: vec![ContinuumDecl { name: "all".into(), template: vec![const_seg(0, 0, 1, 0)] }],
            families: vec![],
        };
        let t = assemble(spec, vec![(PieceOrigin::Continuum("all".into()), rects)]);

        let e = rng.below(4);
        let mut collapse = Vec::new();
        for idx in 0..e {
            let mut set = vec![rng.below(t.atoms.len()) as u32];
            let size = 1 + rng.below(3);
            while set.len() < size {
                let grown: Vec<u32> = set
                    .iter()
                    .flat_map(|&a| t.adjacency[a as usize].iter().copied())
                    .filter(|a| !set.contains(a))
                    .collect();
                if grown.is_empty() {
                    break;
                }
                set.push(grown[rng.below(grown.len())]);
            }
            let parts: Vec<Rect> = set.iter().map(|&a| t.atom(a).rect.clone()).collect();
            collapse.push(CollapseElement {
                label: format!("e{idx}"),
                geometry: PieceGeometry::from_parts_unchecked(parts),
            });
        }
        (t, collapse)
    }

    /// A family ladder: single-atom members converging to a two-atom limit
    /// continuum, everything pairwise separated so the limit closure is
    /// forced identically in every valid partition.
    pub fn ladder_instance(seed: u64) -> (TruncatedCompactum, Vec<CollapseElement>) {
        let mut rng = Rng::new(seed.wrapping_add(1009));
        let c = 3 + rng.below(3);
        let spec = CompactumSpec {
            name: "ladder".into(),
            continua: vec![ContinuumDecl {
                name: "L".into(),
                template: vec![const_seg(0, 0, 1, 0)],
            }],
            families: vec![FamilyDecl {
                name: "f".into(),
                param_name: "n".into(),
                domain: ParamDomain::Nat,
                accumulates_self: false,
                template: vec![GeoTemplate {
                    kind: GeoKind::Seg,
                    a: (
                        Expr::constant(Scalar::zero()),
                        Expr { constant: Scalar::zero(), terms: vec![(Scalar::one(), Var::Pow2Neg)] },
                    ),
                    b: (
                        Expr::constant(Scalar::one()),
                        Expr { constant: Scalar::zero(), terms: vec![(Scalar::one(), Var::Pow2Neg)] },
                    ),
                }],
                limit: LimitClause::Named("L".into()),
            }],
        };
        let half = Scalar::ratio(1, 2);
        let mut pieces = vec![(
            PieceOrigin::Continuum("L".into()),
            vec![
                Rect::new(Scalar::zero(), half.clone(), Scalar::zero(), Scalar::zero()),
                Rect::new(half, Scalar::one(), Scalar::zero(), Scalar::zero()),
            ],
        )];
        for i in 1..=c {
            let y = Scalar::pow2_neg(i as u32);
            pieces.push((
                PieceOrigin::Member {
                    family: "f".into(),
                    param: ParamValue::Nat(i as u32),
                },
                vec![Rect::new(Scalar::zero(), Scalar::one(), y.clone(), y)],
            ));
        }
        let extras = rng.below(8usize.saturating_sub(c + 2) + 1);
        for j in 0..extras {
            let x = Scalar::int(5 + 2 * j as i64);
            pieces.push((
                PieceOrigin::Continuum(format!("x{j}")),
                vec![Rect::new(x.clone(), &x + &Scalar::one(), Scalar::int(5), Scalar::int(5))],
            ));
        }
        let t = assemble(spec, pieces);
        assert!(t.atoms.len() <= 8);

        // Collapse a random subset of members and possibly the limit.
        let mut collapse = Vec::new();
        for (param, pid) in t.family_members("f") {
            if rng.below(2) == 0 && collapse.len() < 3 {
                collapse.push(CollapseElement {
                    label: format!("f:{param}"),
                    geometry: t.piece(pid).geometry.clone(),
                });
            }
        }
        if rng.below(2) == 0 && collapse.len() < 3 {
            collapse.push(CollapseElement {
                label: "L".into(),
                geometry: t.piece_by_label("L").unwrap().geometry.clone(),
            });
        }
        (t, collapse)
    }

    /// Enumerates every partition of n items as restricted growth strings.
    fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize])) {
        let mut class_of = vec![0usize; n];
        fn rec(i: usize, max_used: usize, class_of: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
            let n = class_of.len();
            if i == n {
                visit(class_of);
                return;
            }
            for c in 0..=max_used + 1 {
                class_of[i] = c;
                rec(i + 1, max_used.max(c), class_of, visit);
            }
        }
        if n == 0 {
            return;
        }
        rec(1, 0, &mut class_of, &mut visit);
    }

    fn groups_of(class_of: &[usize]) -> Vec<Vec<u32>> {
        let k = class_of.iter().copied().max().unwrap_or(0) + 1;
        let mut groups = vec![Vec::new(); k];
        for (a, &c) in class_of.iter().enumerate() {
            groups[c].push(a as u32);
        }
        groups
    }

    /// Independent validity check: (a) respects the collapse family,
    /// (b) connected classes, (c) stable under the family limit closure.
    fn valid(
        t: &TruncatedCompactum,
        collapse: &[CollapseElement],
        class_of: &[usize],
        groups: &[Vec<u32>],
    ) -> bool {
        // (a) every element in one class; touching elements share a class.
        let mut element_class = Vec::with_capacity(collapse.len());
        for el in collapse {
            let atoms = t.atoms_within(&el.geometry);
            let c = class_of[atoms[0] as usize];
            if atoms.iter().any(|&a| class_of[a as usize] != c) {
                return false;
            }
            element_class.push(c);
        }
        for i in 0..collapse.len() {
            for j in i + 1..collapse.len() {
                let touching = fsmodel::geometry::set_distance(
                    &collapse[i].geometry,
                    &collapse[j].geometry,
                )
                .is_zero();
                if touching && element_class[i] != element_class[j] {
                    return false;
                }
            }
        }
        // (b) classes connected in the atom graph.
        for g in groups {
            if !g.is_empty() && !t.atom_set_connected(g) {
                return false;
            }
        }
        // (c) the limit closure adds nothing.
        for f in &t.spec.families {
            let LimitClause::Named(limit_name) = &f.limit else { continue };
            let members = t.family_members(&f.name);
            let count = members.len();
            if count < 3 {
                continue;
            }
            let tail = (count / 2).min(count - 2);
            let mut aug: Option<BTreeSet<u32>> = None;
            let mut applicable = true;
            for (_, pid) in &members[tail..] {
                let atoms = &t.piece_atoms[*pid as usize];
                let cls = class_of[atoms[0] as usize];
                if atoms.iter().any(|&a| class_of[a as usize] != cls) {
                    applicable = false;
                    break;
                }
                let member_set: BTreeSet<u32> = atoms.iter().copied().collect();
                let this: BTreeSet<u32> = groups[cls]
                    .iter()
                    .copied()
                    .filter(|a| !member_set.contains(a))
                    .collect();
                match &aug {
                    None => aug = Some(this),
                    Some(prev) if *prev == this => {}
                    Some(_) => {
                        applicable = false;
                        break;
                    }
                }
            }
            if !applicable {
                continue;
            }
            let aug = aug.unwrap_or_default();
            let continuum = t.spec.continuum(limit_name).unwrap();
            let limit_geometry = fsmodel::cdl::instantiate_continuum(continuum).unwrap();
            let mut parts = limit_geometry.parts().to_vec();
            parts.extend(aug.iter().map(|&a| t.atom(a).rect.clone()));
            if !is_connected(&parts) {
                continue;
            }
            let joined = PieceGeometry::from_parts_unchecked(parts);
            if !joined.diameter().is_positive() {
                continue;
            }
            let targets = t.atoms_within(&joined);
            let classes: BTreeSet<usize> =
                targets.iter().map(|&a| class_of[a as usize]).collect();
            if classes.len() >= 2 {
                return false;
            }
        }
        true
    }

    /// Asserts finest_relation == the greatest lower bound of every valid
    /// enumerated partition, and that the GLB is itself valid.
    pub fn check_instance(t: &TruncatedCompactum, collapse: &[CollapseElement]) {
        let n = t.atoms.len();
        assert!(n <= 8, "oracle instances stay enumerable");
        let mut same = vec![true; n * n];
        let mut any_valid = false;
        for_each_partition(n, |class_of| {
            let groups = groups_of(class_of);
            if !valid(t, collapse, class_of, &groups) {
                return;
            }
            any_valid = true;
            for a in 0..n {
                for b in a + 1..n {
                    if class_of[a] != class_of[b] {
                        same[a * n + b] = false;
                    }
                }
            }
        });
        assert!(any_valid, "the valid set is never empty");
        // Build the GLB from the accumulated matrix.
        let mut glb_class = vec![usize::MAX; n];
        let mut next = 0;
        for a in 0..n {
            if glb_class[a] != usize::MAX {
                continue;
            }
            glb_class[a] = next;
            for b in a + 1..n {
                if same[a * n + b] {
                    glb_class[b] = next;
                }
            }
            next += 1;
        }
        let glb_groups = groups_of(&glb_class);
        assert!(
            valid(t, collapse, &glb_class, &glb_groups),
            "the GLB satisfies (a)-(c) itself"
        );
        let engine = finest_relation(t, collapse, &ClosureConfig::default()).unwrap();
        let glb = Partition::from_groups(t, &glb_groups);
        assert!(
            engine.same_partition(&glb),
            "engine output equals the enumerated GLB"
        );
        // Determinism doubles as the uniqueness statement at finite scale.
        let again = finest_relation(t, collapse, &ClosureConfig::default()).unwrap();
        assert!(engine.same_partition(&again));
    }
}
