//! End-to-end runs of the simulated cluster.

use cumulus_core::protocol::{Action, InputEvent};
use cumulus_core::sim::{file_content, run_workload, Script, SimConfig, SimWorld};
use cumulus_core::Digest;

fn config() -> SimConfig {
    SimConfig {
        block_size: 64 * 1024,
        ..SimConfig::default()
    }
}

fn run(config: &SimConfig, script: &str) -> cumulus_core::sim::MetricsReport {
    run_workload(config, &Script::parse(script).unwrap()).unwrap()
}

#[test]
fn session_stream_matches_host_frames() {
    let mut script = String::from("AT 0 OPEN a alice\nAT 0 OPEN b bob 320 240\n");
    for i in 0..40u64 {
        let t = 100 + i * 50;
        script.push_str(&format!("AT {t} EVENT a KEYDOWN {}\n", 65 + i % 26));
        script.push_str(&format!("AT {t} EVENT b MOUSEMOVE {} {}\n", i * 7, i * 5));
        script.push_str(&format!("AT {t} EVENT b MOUSEDOWN {} {} 0\n", i * 7, i * 5));
    }
    script.push_str("AT 5000 CLOSE a\n");
    let r = run(&config(), &script);
    assert_eq!(r.value("sessions_opened"), 2.0);
    assert_eq!(r.value("sessions_closed"), 1.0);
    assert_eq!(r.value("events_injected"), 120.0);
    assert_eq!(r.value("events_rejected"), 0.0);
    assert_eq!(r.value("frame_mismatches"), 0.0);
    assert_eq!(r.value("frame_gaps"), 0.0);
    assert!(r.value("latency_samples") > 0.0);
    assert!(
        r.value("latency_p50") >= 2.0,
        "two hops of at least one tick each"
    );
    assert!(r.value("delta_to_baseline_ratio") < 1.0);
}

#[test]
fn client_copy_tracks_host_copy() {
    let mut w = SimWorld::new(config()).unwrap();
    let id = w.open_session("carol", (320, 240)).unwrap();
    for seq in 1..=30u64 {
        let action = if seq % 2 == 0 {
            Action::KeyDown {
                keycode: 48 + seq as u16,
            }
        } else {
            Action::MouseDown {
                x: seq as u16 * 9,
                y: seq as u16 * 6,
                button: 0,
            }
        };
        w.submit_event(id, InputEvent::new(seq, action)).unwrap();
        let t = w.now() + 20;
        w.run_until(t);
    }
    let t = w.now() + 100;
    w.run_until(t);
    assert_eq!(w.client_frame_digest(id), w.host_frame_digest(id));
    assert!(w
        .submit_event(id, InputEvent::new(30, Action::KeyDown { keycode: 1 }))
        .is_err());
}

#[test]
fn files_round_trip_and_ranges_verify() {
    let script = "AT 0 PUT docs/a.bin 300000\nAT 0 PUT docs/b.bin 5\nAT 100 GET docs/a.bin\nAT 100 GET docs/a.bin 70000 100000\nAT 100 GET docs/b.bin\nAT 100 GET docs/missing.bin\n";
    let r = run(&config(), script);
    assert_eq!(r.value("files_put"), 2.0);
    assert_eq!(r.value("gets_completed"), 3.0);
    assert_eq!(r.value("get_errors"), 1.0);
    assert_eq!(r.value("get_mismatches"), 0.0);
    assert_eq!(r.value("get_bytes"), 400005.0);
}

#[test]
fn get_results_are_the_put_bytes() {
    let mut w = SimWorld::new(config()).unwrap();
    w.set_capture(true);
    let data = file_content(7, "x/y", 200_000);
    let put = w.put_file("x/y", data.clone());
    w.run_until(10_000);
    assert!(w.take_put_result(put).unwrap().is_ok());
    let get = w.get_file("x/y", Some((1000, 150_000)));
    w.run_until(20_000);
    let got = w.take_get_result(get).unwrap().unwrap();
    assert_eq!(Digest::of(&got), Digest::of(&data[1000..151_000]));
}

#[test]
fn render_host_failure_moves_sessions() {
    let mut script = String::from("AT 0 OPEN a alice\nAT 0 OPEN b bob\n");
    for i in 0..5u64 {
        script.push_str(&format!(
            "AT {} EVENT a KEYDOWN {}\n",
            500 + i * 100,
            65 + i
        ));
    }
    script.push_str("AT 1000 KILL r1\n");
    for i in 0..10u64 {
        script.push_str(&format!(
            "AT {} EVENT a KEYDOWN {}\n",
            6000 + i * 100,
            75 + i
        ));
    }
    let r = run(&config(), &script);
    assert!(r.value("failures_detected") >= 1.0);
    assert_eq!(r.value("failovers"), 2.0);
    assert_eq!(r.value("frame_mismatches"), 0.0);
    assert!(r.value("failover_ticks_max") > 0.0);
}

#[test]
fn storage_failure_is_repaired() {
    let script = "AT 0 PUT f/1 400000\nAT 0 PUT f/2 400000\nAT 2000 KILL s1\nAT 2000 GET f/1\n";
    let r = run(&config(), script);
    assert_eq!(r.value("get_errors"), 0.0);
    assert_eq!(r.value("get_mismatches"), 0.0);
    assert!(r.value("repairs_done") > 0.0);
    assert_eq!(r.value("blocks_misreplicated"), 0.0);
    assert_eq!(r.value("blocks_lost"), 0.0);
}

#[test]
fn lossy_links_still_converge() {
    let cfg = SimConfig {
        loss: 0.05,
        ..config()
    };
    let mut script = String::from("AT 0 OPEN a alice\nAT 0 PUT f 100000\n");
    for i in 0..30u64 {
        script.push_str(&format!(
            "AT {} EVENT a KEYDOWN {}\n",
            100 + i * 10,
            65 + i % 26
        ));
    }
    script.push_str("AT 500 GET f\n");
    let r = run(&cfg, &script);
    assert!(r.value("retransmissions") > 0.0);
    assert_eq!(r.value("frame_mismatches"), 0.0);
    assert_eq!(r.value("frame_gaps"), 0.0);
    assert_eq!(r.value("get_mismatches"), 0.0);
    assert_eq!(r.value("gets_completed"), 1.0);
}

#[test]
fn same_seed_same_report_and_seed_matters() {
    let script = "AT 0 OPEN a alice\nAT 10 EVENT a KEYDOWN 70\nAT 20 PUT f 70000\nAT 30 GET f\n";
    let cfg = SimConfig {
        loss: 0.1,
        ..config()
    };
    let a = run(&cfg, script).to_csv();
    let b = run(&cfg, script).to_csv();
    assert_eq!(a, b);
    let c = run(
        &SimConfig {
            seed: 9,
            ..cfg.clone()
        },
        script,
    )
    .to_csv();
    assert_ne!(a, c);
}

#[test]
fn bad_scripts_rejected_before_running() {
    let mut w = SimWorld::new(config()).unwrap();
    assert!(w
        .load_script(&Script::parse("AT 5 KILL r99").unwrap())
        .is_err());
    assert!(w
        .load_script(&Script::parse("AT 5 KILL control").unwrap())
        .is_err());
    assert!(w
        .load_script(&Script::parse("AT 5 OPEN a u 7 7").unwrap())
        .is_err());
    assert!(w
        .load_script(&Script::parse("AT 5 KILL s1").unwrap())
        .is_ok());
}

#[test]
fn end_stops_early() {
    let r = run(
        &config(),
        "AT 0 OPEN a alice\nAT 250 END\nAT 9000 EVENT a KEYDOWN 1\n",
    );
    assert_eq!(r.value("ticks_simulated"), 250.0);
    assert_eq!(r.value("events_injected"), 0.0);
}
