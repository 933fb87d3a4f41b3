// temporary analysis probe against saved long-run checkpoints
use mdlab::io::read_checkpoint;
use mdlab::lp::qjk_norms;
use mdlab::scattering::{drift_report, DriftSpec};

#[test]
#[ignore]
fn probe_longrun_drifts() {
    let dir = std::path::Path::new("/tmp/mdlab-long/out");
    let mut snaps = Vec::new();
    for t in ["checkpoint_t00005.", "checkpoint_t00010.", "checkpoint_t00020.", "checkpoint_final"] {
        let mut found = None;
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            if name.starts_with(t) {
                found = Some(p);
            }
        }
        snaps.push(read_checkpoint(&found.expect(t)).unwrap());
    }
    println!("times: {:?}", snaps.iter().map(|s| s.state.t).collect::<Vec<_>>());

    let spec = DriftSpec { k_lo: -3, k_hi: 2, top_modes: 10 };
    let rep = drift_report(&snaps[1], &snaps[3], &spec).unwrap();
    println!("== criterion 8 detail (10 -> 40) ==");
    for sh in &rep.shells {
        println!(
            "k={:2}: unc=({:.3e},{:.3e}) cor=({:.3e},{:.3e})",
            sh.k, sh.uncorrected_sup[0], sh.uncorrected_sup[1], sh.corrected_sup[0], sh.corrected_sup[1]
        );
    }
    for m in &rep.top_modes {
        let bound = 0.2 * m.argument_drift * m.amplitude;
        println!(
            "mode {:?} theta={} amp={:.3e} modulus={:.3e} argument={:.4e} ratio={:.3}",
            m.mode, m.theta, m.amplitude, m.modulus_drift, m.argument_drift,
            if bound > 0.0 { m.modulus_drift / bound } else { f64::NAN }
        );
    }

    println!("== criterion 9 detail ==");
    for (tag, a, b) in [("early 5->10", 0usize, 1usize), ("late 20->40", 2, 3)] {
        println!("{tag}:");
        for k in -3..=2 {
            let mut per_mu = [[0.0f64; 2]; 4];
            for mu in 0..4 {
                for si in 0..2 {
                    let dv = snaps[b].state.v[mu][si].sub(&snaps[a].state.v[mu][si]).unwrap();
                    let per_j = qjk_norms(&dv, k).unwrap();
                    let sum: f64 = per_j.iter().map(|(j, n)| 2f64.powi(*j) * n).sum();
                    per_mu[mu][si] = sum;
                    if mu == 0 && si == 0 && (k == 0 || k == -1) {
                        let detail: Vec<String> = per_j.iter().map(|(j, n)| format!("j{j}:{:.2e}", 2f64.powi(*j)*n)).collect();
                        println!("  k={k} mu=0 +: {}", detail.join(" "));
                    }
                }
            }
            let flat: Vec<String> = (0..4).map(|mu| format!("mu{mu}=({:.2e},{:.2e})", per_mu[mu][0], per_mu[mu][1])).collect();
            println!("  k={k:2}: {}", flat.join(" "));
        }
    }
}
