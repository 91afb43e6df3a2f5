//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
//!
//! Every expected value is computed here, independently of the code under test: file bytes are
//! sliced directly, placements come from an exhaustive scan, tile diffs from a per-pixel compare.

use std::collections::BTreeSet;
use std::time::Instant;

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cumulus_core::dfs::ReqId;
use cumulus_core::protocol::{apply_update, diff_framebuffer, Framebuffer};
use cumulus_core::render::SessionId;
use cumulus_core::sim::forecast::{run_forecast, ForecastConfig};
use cumulus_core::sim::{
    file_content, run_workload, MetricsReport, Role, Script, SimConfig, SimWorld,
};
use cumulus_core::vmm::placement::policy;
use cumulus_core::vmm::{place_session, NodeTelemetry, PolicyKind, ResourceKind, ResourceVector};
use cumulus_core::{Digest, NodeId};

const MIB: u64 = 1 << 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---- shared helpers ----

/// Drives the world until nothing it started is still in flight.
fn settle(world: &mut SimWorld) {
    let mut guard = 0;
    while world.busy() {
        let t = world.now() + 1000;
        world.run_until(t);
        guard += 1;
        assert!(guard < 100_000, "world never settled");
    }
}

/// Live storage nodes that hold an intact copy of `digest`.
fn intact_holders(world: &SimWorld, digest: &Digest) -> usize {
    world
        .node_ids()
        .filter(|&id| world.role(id) == Some(Role::Storage) && world.is_alive(id))
        .filter(|&id| {
            let node = world.storage_node(id).unwrap();
            matches!(node.store().get(digest), Ok(Some(b)) if Digest::of(&b) == *digest)
        })
        .count()
}

struct Read {
    req: ReqId,
    expected: Digest,
}

fn issue_reads(
    world: &mut SimWorld,
    files: &[(String, Bytes)],
    rng: &mut ChaCha8Rng,
    per_file: usize,
) -> Vec<Read> {
    let mut reads = Vec::new();
    for (path, data) in files {
        let len = data.len() as u64;
        reads.push(Read {
            req: world.get_file(path, None),
            expected: Digest::of(data),
        });
        for _ in 0..per_file {
            let off = rng.random_range(0..=len);
            let n = rng.random_range(0..=len - off);
            reads.push(Read {
                req: world.get_file(path, Some((off, n))),
                expected: Digest::of(&data[off as usize..(off + n) as usize]),
            });
        }
    }
    reads
}

fn check_reads(world: &mut SimWorld, reads: &[Read]) -> (usize, usize) {
    let mut ok = 0;
    for r in reads {
        if let Some(Ok(bytes)) = world.take_get_result(r.req) {
            if Digest::of(&bytes) == r.expected {
                ok += 1;
            }
        }
    }
    (ok, reads.len())
}

// ---- 1: DFS round trip ----

fn dfs_round_trip() -> Outcome {
    let started = Instant::now();
    let config = SimConfig {
        seed: 11,
        storage_nodes: 5,
        replication: 3,
        bandwidth_mbps: 1000,
        ..SimConfig::default()
    };
    let mut world = SimWorld::new(config).unwrap();
    world.set_capture(true);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut files = Vec::new();
    let mut puts = Vec::new();
    for i in 0..100 {
        let size = match i {
            0 => 0,
            1 => 20 * MIB,
            _ => rng.random_range(0..=20 * MIB),
        };
        let path = format!("ac1/file-{i:03}.bin");
        let data = file_content(1, &path, size);
        puts.push(world.put_file(&path, data.clone()));
        files.push((path, data));
    }
    settle(&mut world);
    let stored = puts
        .iter()
        .filter(|&&r| matches!(world.take_put_result(r), Some(Ok(_))))
        .count();
    let reads = issue_reads(&mut world, &files, &mut rng, 3);
    settle(&mut world);
    let (ok, total) = check_reads(&mut world, &reads);
    let secs = started.elapsed().as_secs_f64();
    outcome(
        stored == 100 && ok == total && secs < 60.0,
        format!("{stored}/100 stored, {ok}/{total} reads digest-equal, {secs:.1}s wall"),
    )
}

// ---- 2: fault tolerance ----

fn fault_tolerance() -> Outcome {
    let config = SimConfig {
        seed: 12,
        storage_nodes: 5,
        replication: 3,
        bandwidth_mbps: 100,
        block_size: MIB,
        ..SimConfig::default()
    };
    let mut world = SimWorld::new(config).unwrap();
    world.set_capture(true);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut files = Vec::new();
    for i in 0..20 {
        let path = format!("ac2/f{i}");
        let data = file_content(2, &path, rng.random_range(0..=6 * MIB));
        world.put_file(&path, data.clone());
        files.push((path, data));
    }
    settle(&mut world);
    let reads = issue_reads(&mut world, &files, &mut rng, 2);
    // Let the reads get going, then pull a node out from under them.
    let t = world.now() + 200;
    world.run_until(t);
    let victim = world.node_by_label("s3").unwrap();
    let mid_read = world.busy();
    world.kill(victim);
    settle(&mut world);
    let (ok, total) = check_reads(&mut world, &reads);
    let r = world.report();
    let index = world.dfs().index();
    let short: Vec<_> = index
        .keys()
        .filter(|d| intact_holders(&world, d) != 3)
        .collect();
    let replica_sets_ok = index
        .values()
        .all(|e| e.replicas.len() == 3 && !e.replicas.contains(&victim));
    let pass = mid_read
        && ok == total
        && short.is_empty()
        && replica_sets_ok
        && world.dfs().misreplicated().is_empty()
        && r.value("blocks_lost") == 0.0;
    outcome(
        pass,
        format!(
            "{ok}/{total} reads correct, {} blocks scanned, {} below R=3, repairs {} by tick {}",
            index.len(),
            short.len(),
            r.value("repairs_done"),
            r.value("last_repair_tick")
        ),
    )
}

// ---- 3: placement oracle ----

fn cmp_frac(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

/// Smallest fraction `v[k] / cap[k]` over kinds the node offers, by exhaustive pairwise compare.
fn min_fraction(v: &ResourceVector, cap: &ResourceVector) -> (u64, u64) {
    let fracs: Vec<(u64, u64)> = ResourceKind::ALL
        .iter()
        .filter(|&&k| cap.get(k) > 0)
        .map(|&k| (v.get(k), cap.get(k)))
        .collect();
    fracs
        .iter()
        .copied()
        .find(|&f| fracs.iter().all(|&g| cmp_frac(f, g).is_le()))
        .unwrap_or((0, 1))
}

fn oracle_place(
    kind: PolicyKind,
    req: &ResourceVector,
    cluster: &[NodeTelemetry],
) -> Option<NodeId> {
    let feasible: Vec<(NodeId, (u64, u64))> = cluster
        .iter()
        .filter(|n| {
            ResourceKind::ALL
                .iter()
                .all(|&k| req.get(k) + n.allocated.get(k) <= n.capacity.get(k))
        })
        .map(|n| {
            let free = ResourceVector::from_array(std::array::from_fn(|i| {
                n.capacity.to_array()[i] - n.allocated.to_array()[i]
            }));
            let score = match kind {
                PolicyKind::Consolidate => {
                    let left = ResourceVector::from_array(std::array::from_fn(|i| {
                        free.to_array()[i] - req.to_array()[i]
                    }));
                    min_fraction(&left, &n.capacity)
                }
                PolicyKind::Spread => min_fraction(&free, &n.capacity),
            };
            (n.node_id, score)
        })
        .collect();
    // Best score wins; among equal scores the lowest id.
    feasible
        .iter()
        .filter(|(id, s)| {
            feasible.iter().all(|(other, t)| {
                let ord = cmp_frac(*s, *t);
                let better = match kind {
                    PolicyKind::Consolidate => ord.is_lt(),
                    PolicyKind::Spread => ord.is_gt(),
                };
                other == id || better || (ord.is_eq() && id < other)
            })
        })
        .map(|(id, _)| *id)
        .next()
}

fn random_cluster(rng: &mut ChaCha8Rng) -> Vec<NodeTelemetry> {
    let n = rng.random_range(1..=6);
    let mut ids: Vec<u32> = (1..=20).collect();
    (0..n)
        .map(|_| {
            let id = ids.remove(rng.random_range(0..ids.len()));
            let mut cap = [0u64; 4];
            let mut alloc = [0u64; 4];
            for k in 0..4 {
                cap[k] = if rng.random_bool(0.05) {
                    0
                } else {
                    rng.random_range(1..=16) * 500
                };
                alloc[k] = if cap[k] == 0 {
                    0
                } else {
                    rng.random_range(0..=cap[k] / 1000) * 500
                };
            }
            let mut t = NodeTelemetry::new(NodeId(id), ResourceVector::from_array(cap));
            t.allocated = ResourceVector::from_array(alloc);
            t
        })
        .collect()
}

fn placement_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut detail = Vec::new();
    let mut pass = true;
    for kind in [PolicyKind::Consolidate, PolicyKind::Spread] {
        let (mut matched, mut placed) = (0, 0);
        for i in 0..1000 {
            let cluster = random_cluster(&mut rng);
            let req =
                ResourceVector::from_array(std::array::from_fn(|_| rng.random_range(0..=4) * 500));
            let expected = oracle_place(kind, &req, &cluster);
            let mut scratch = cluster.clone();
            let got = place_session(SessionId(i), &req, &mut scratch, policy(kind))
                .ok()
                .map(|d| d.chosen_node);
            placed += usize::from(got.is_some());
            matched += usize::from(got == expected);
        }
        pass &= matched == 1000;
        detail.push(format!("{kind}: {matched}/1000 match ({placed} placed)"));
    }
    outcome(pass, detail.join(", "))
}

// ---- 4: tile-diff oracle ----

fn random_pair(rng: &mut ChaCha8Rng) -> (Framebuffer, Framebuffer) {
    let mut prev = Framebuffer::new(64, 64);
    for _ in 0..rng.random_range(0..6) {
        let (x, y) = (rng.random_range(0..64), rng.random_range(0..64));
        let (w, h) = (rng.random_range(1..=64 - x), rng.random_range(1..=64 - y));
        prev.fill_rect(x, y, w, h, rng.random());
    }
    let mut next = prev.clone();
    match rng.random_range(0..4) {
        0 => {}
        1 => {
            for _ in 0..rng.random_range(1..20) {
                next.set_pixel(
                    rng.random_range(0..64),
                    rng.random_range(0..64),
                    rng.random(),
                );
            }
        }
        2 => {
            let (x, y) = (rng.random_range(0..64), rng.random_range(0..64));
            next.fill_rect(
                x,
                y,
                rng.random_range(1..=64 - x),
                rng.random_range(1..=64 - y),
                rng.random(),
            );
        }
        _ => {
            for y in 0..64 {
                for x in 0..64 {
                    next.set_pixel(x, y, rng.random());
                }
            }
        }
    }
    (prev, next)
}

fn tile_diff_oracle() -> Outcome {
    const TILE: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut sets_equal, mut rebuilt) = (0, 0);
    for _ in 0..500 {
        let (prev, next) = random_pair(&mut rng);
        let mut expected = BTreeSet::new();
        for y in 0..64 {
            for x in 0..64 {
                if prev.pixel(x, y) != next.pixel(x, y) {
                    expected.insert(((y / TILE) as u16, (x / TILE) as u16));
                }
            }
        }
        let update = diff_framebuffer(&prev, &next, TILE).unwrap();
        let got: BTreeSet<_> = update.tiles.iter().map(|t| (t.row, t.col)).collect();
        sets_equal += usize::from(got == expected && got.len() == update.tiles.len());
        let applied = apply_update(&prev, &update).unwrap();
        rebuilt += usize::from(applied.pixels() == next.pixels());
    }
    outcome(
        sets_equal == 500 && rebuilt == 500,
        format!("{sets_equal}/500 dirty sets equal, {rebuilt}/500 bit-exact reconstructions"),
    )
}

// ---- 5: utilization ----

fn utilization() -> Outcome {
    let base = SimConfig {
        seed: 5,
        render_nodes: 4,
        slots_per_node: 8,
        ..SimConfig::default()
    };
    let mut script = String::new();
    for i in 0..240u64 {
        script.push_str(&format!("AT {} OPEN s{i} user{} \n", i * 250, i % 16));
    }
    let mut lines: Vec<(u64, String)> = script
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 * 250, l.to_string()))
        .collect();
    for i in 0..240u64 {
        let t = i * 250 + 30_000;
        if t < 60_000 {
            lines.push((t, format!("AT {t} CLOSE s{i}")));
        }
    }
    lines.sort_by_key(|(t, _)| *t);
    let mut text: String = lines
        .iter()
        .map(|(_, l)| format!("{}\n", l.trim_end()))
        .collect();
    text.push_str("AT 60000 END\n");
    let consolidated = run_workload(
        &SimConfig {
            policy: PolicyKind::Consolidate,
            ..base.clone()
        },
        &Script::parse(&text).unwrap(),
    )
    .unwrap();

    let mut low = String::new();
    for i in 0..6 {
        low.push_str(&format!("AT {} OPEN s{i} user{i}\n", i * 250));
    }
    low.push_str("AT 60000 END\n");
    let spread = run_workload(
        &SimConfig {
            policy: PolicyKind::Spread,
            ..base
        },
        &Script::parse(&low).unwrap(),
    )
    .unwrap();
    let u = consolidated.value("utilization_mean");
    let b = spread.value("utilization_mean");
    outcome(
        u >= 0.80 && u >= 4.0 * b,
        format!(
            "consolidate {u:.3} (>= 0.80), spread low-demand baseline {b:.3}, ratio {:.1}x (>= 4x), {} rejected at saturation",
            u / b,
            consolidated.value("sessions_rejected")
        ),
    )
}

// ---- 6: delta efficiency ----

fn delta_efficiency() -> Outcome {
    let mut script = String::from("AT 0 OPEN desk alice\n");
    for i in 0..60u64 {
        script.push_str(&format!(
            "AT {} EVENT desk KEYDOWN {}\n",
            1000 + i * 1000,
            65 + i % 26
        ));
    }
    script.push_str("AT 61000 END\n");
    let r = run_workload(
        &SimConfig {
            seed: 6,
            ..SimConfig::default()
        },
        &Script::parse(&script).unwrap(),
    )
    .unwrap();
    let ratio = r.value("update_bytes") / r.value("full_frame_baseline_bytes");
    outcome(
        ratio < 0.10 && r.value("frame_mismatches") == 0.0,
        format!(
            "{} update bytes vs {} full-frame bytes = {ratio:.4} (< 0.10), {} mismatches",
            r.value("update_bytes"),
            r.value("full_frame_baseline_bytes"),
            r.value("frame_mismatches")
        ),
    )
}

// ---- 7: striped read speed-up ----

fn striped_read(storage_nodes: u32) -> MetricsReport {
    let config = SimConfig {
        seed: 7,
        storage_nodes,
        replication: 1,
        block_size: 4 * MIB,
        bandwidth_mbps: 100,
        read_ahead: 0,
        ..SimConfig::default()
    };
    let script = format!("AT 0 PUT big.bin {}\nAT 100000 GET big.bin\n", 32 * MIB);
    run_workload(&config, &Script::parse(&script).unwrap()).unwrap()
}

fn striped_speedup() -> Outcome {
    let one = striped_read(1);
    let four = striped_read(4);
    let (t1, t4) = (one.value("read_ticks_mean"), four.value("read_ticks_mean"));
    let ratio = t4 / t1;
    let ok = one.value("get_mismatches") + four.value("get_mismatches") == 0.0
        && one.value("gets_completed") == 1.0
        && four.value("gets_completed") == 1.0;
    outcome(
        ok && ratio <= 0.35,
        format!("1 node {t1} ticks, 4 nodes {t4} ticks, ratio {ratio:.3} (<= 0.35)"),
    )
}

// ---- 8: determinism ----

fn determinism() -> Outcome {
    let mut script =
        String::from("AT 0 OPEN a alice\nAT 0 OPEN b bob 320 240\nAT 0 PUT d/x 3000000\n");
    for i in 0..50u64 {
        let t = 100 + i * 40;
        script.push_str(&format!("AT {t} EVENT a KEYDOWN {}\n", 65 + i % 26));
        script.push_str(&format!("AT {t} EVENT b MOUSEDOWN {} {} 0\n", i * 6, i * 4));
        if i == 10 {
            script.push_str(&format!("AT {t} GET d/x 1000 2000000\n"));
        }
        if i == 20 {
            script.push_str(&format!("AT {t} KILL r1\nAT {t} KILL s2\n"));
        }
    }
    script.push_str("AT 9000 REVIVE r1\nAT 9000 REVIVE s2\nAT 9500 GET d/x\n");
    let script = Script::parse(&script).unwrap();
    let mut all_equal = true;
    for seed in [1u64, 2, 3] {
        let config = SimConfig {
            seed,
            loss: 0.02,
            block_size: MIB,
            ..SimConfig::default()
        };
        let a = run_workload(&config, &script).unwrap().to_csv();
        let b = run_workload(&config, &script).unwrap().to_csv();
        all_equal &= a.as_bytes() == b.as_bytes();
    }
    outcome(
        all_equal,
        "3 seeds x 2 runs, metrics CSV byte-identical per seed",
    )
}

// ---- 9: habit predictor ----

fn habit_predictor() -> Outcome {
    let r = run_forecast(&ForecastConfig::default(), &["ewma", "last-value"]).unwrap();
    let ewma = r.mae_of("ewma").unwrap();
    let last = r.mae_of("last-value").unwrap();
    outcome(
        ewma < last,
        format!(
            "14 days, {} samples: EWMA MAE {ewma:.4} < last-value MAE {last:.4}",
            r.samples
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("dfs round trip", dfs_round_trip),
        ("fault tolerance", fault_tolerance),
        ("placement oracle", placement_oracle),
        ("tile-diff oracle", tile_diff_oracle),
        ("utilization", utilization),
        ("delta efficiency", delta_efficiency),
        ("striped read speed-up", striped_speedup),
        ("determinism", determinism),
        ("habit predictor", habit_predictor),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} AC{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
