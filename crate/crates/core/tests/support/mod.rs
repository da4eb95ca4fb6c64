//! Shared helpers for the integration tests: fixture loading, a random
//! instance generator and an independent full-resolution LP.

#![allow(dead_code)]

use std::path::PathBuf;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldslab::config::{load_config, load_timeseries, GeneratorKind, SystemConfig, TimeSeriesTable};
use ldslab::lp::{solve_reference, LpModel, Sense, SimplexOptions, SolveStatus, VarId};

pub struct Instance {
    pub label: String,
    pub config: SystemConfig,
    pub ts: TimeSeriesTable,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> Instance {
    let dir = fixtures_dir();
    let config = load_config(dir.join(format!("{name}.toml"))).unwrap();
    let ts = load_timeseries(dir.join(format!("{name}.csv")), &config).unwrap();
    Instance {
        label: name.to_string(),
        config,
        ts,
    }
}

pub fn with_sdc(mut inst: Instance, sdc: f64) -> Instance {
    for s in &mut inst.config.storages {
        s.eta_sdc = sdc;
    }
    inst.label = format!("{} (sdc={sdc})", inst.label);
    inst
}

/// Small random system: 1-2 zones, N in {4, 8}, T in {4, 6}, thermal and
/// solar in every zone, one LDS unit, sometimes a short-duration battery and
/// a line.
pub fn random_instance(seed: u64, sdc: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zones = rng.gen_range(1..=2usize);
    let n = if rng.gen_bool(0.5) { 4 } else { 8 };
    let t = if rng.gen_bool(0.5) { 4 } else { 6 };
    let k = rng.gen_range(2..=3usize);
    let h = n * t;

    let mut toml = format!(
        "nse_penalty = 500.0\n[horizon]\nH = {h}\nT = {t}\ndt_hours = 1.0\n\
         [aggregation]\nnum_representatives = {k}\nseed = {seed}\n"
    );
    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    for z in 1..=zones {
        toml += &format!("[[zone]]\nname = \"Z{z}\"\n");
    }
    for z in 1..=zones {
        toml += &format!(
            "[[generator]]\nname = \"gas{z}\"\nzone = \"Z{z}\"\nkind = \"thermal\"\ncapex = {:.3}\nvarcost = {:.3}\n",
            rng.gen_range(15.0..40.0),
            rng.gen_range(2.0..8.0)
        );
        toml += &format!(
            "[[generator]]\nname = \"pv{z}\"\nzone = \"Z{z}\"\nkind = \"vre\"\ncapex = {:.3}\nvarcost = 0.0\n\
             availability_series = \"pv.Z{z}\"\n",
            rng.gen_range(3.0..10.0)
        );
        let mut demand = Vec::with_capacity(h);
        let mut pv = Vec::with_capacity(h);
        for period in 0..n {
            let season: f64 = 0.2
                + 0.8
                    * ((period as f64 / n as f64) * std::f64::consts::PI)
                        .sin()
                        .abs();
            let level = rng.gen_range(4.0..8.0);
            for step in 0..t {
                let day = ((step as f64 + 0.5) / t as f64 * std::f64::consts::PI).sin();
                pv.push((season * day * rng.gen_range(0.7..1.0)).clamp(0.0, 1.0));
                demand.push(level + rng.gen_range(0.0..3.0));
            }
        }
        columns.insert(format!("demand.Z{z}"), demand);
        columns.insert(format!("pv.Z{z}"), pv);
    }
    toml += &format!(
        "[[storage]]\nname = \"lds\"\nzone = \"Z1\"\nis_lds = true\ncapex_energy = {:.3}\ncapex_power = {:.3}\n\
         eta_cha = {:.3}\neta_dis = {:.3}\neta_sdc = {sdc}\n",
        rng.gen_range(0.3..2.0),
        rng.gen_range(2.0..6.0),
        rng.gen_range(0.8..0.95),
        rng.gen_range(0.8..0.95)
    );
    if rng.gen_bool(0.5) {
        toml += &format!(
            "[[storage]]\nname = \"bat\"\nzone = \"Z{zones}\"\nis_lds = false\ncapex_energy = {:.3}\n\
             capex_power = {:.3}\neta_cha = 0.95\neta_dis = 0.95\neta_sdc = 0.0\n",
            rng.gen_range(2.0..6.0),
            rng.gen_range(1.0..4.0)
        );
    }
    if zones == 2 {
        toml += &format!(
            "[[line]]\nfrom = \"Z1\"\nto = \"Z2\"\ncapex = {:.3}\n",
            rng.gen_range(0.5..4.0)
        );
    }
    let config = SystemConfig::from_toml_str(&toml).unwrap();
    Instance {
        label: format!("random#{seed}"),
        config,
        ts: TimeSeriesTable::new(columns).unwrap(),
    }
}

/// Builds and solves the un-aggregated LP directly: one SOC per hour for
/// long-duration units (cyclic over the horizon), per-period cyclic SOC for
/// short-duration units. Returns the optimal objective.
pub fn full_resolution_objective(config: &SystemConfig, ts: &TimeSeriesTable) -> f64 {
    let h_len = config.horizon.steps;
    let t_len = config.horizon.period_len;
    let dt = config.horizon.dt_hours;
    let mut m = LpModel::new("full");
    let inf = f64::INFINITY;
    let hourly = |m: &mut LpModel, prefix: &str, obj: f64| -> Vec<VarId> {
        (0..h_len)
            .map(|h| {
                m.add_variable(format!("{prefix}_{h}"), 0.0, inf, obj)
                    .unwrap()
            })
            .collect()
    };

    // zone -> list of (var, coefficient) per hour
    let zone_of = |name: &str| config.zones.iter().position(|z| z.name == name).unwrap();
    let mut injections: Vec<Vec<Vec<(VarId, f64)>>> =
        vec![vec![Vec::new(); h_len]; config.zones.len()];

    for (i, g) in config.generators.iter().enumerate() {
        let cap = m
            .add_variable(format!("gcap_{i}"), 0.0, inf, g.capex)
            .unwrap();
        let out = hourly(&mut m, &format!("g{i}"), dt * g.varcost);
        let z = zone_of(&g.zone);
        for h in 0..h_len {
            let avail = match g.kind {
                GeneratorKind::Thermal => 1.0,
                GeneratorKind::Vre => ts
                    .column(g.availability_series.as_deref().unwrap())
                    .unwrap()[h],
            };
            m.add_row(
                format!("avail_{i}_{h}"),
                Sense::Le,
                0.0,
                [(out[h], 1.0), (cap, -avail)],
            )
            .unwrap();
            injections[z][h].push((out[h], 1.0));
        }
    }
    for (i, s) in config.storages.iter().enumerate() {
        let e = m
            .add_variable(format!("e_{i}"), 0.0, inf, s.capex_energy)
            .unwrap();
        let p = m
            .add_variable(format!("p_{i}"), 0.0, inf, s.capex_power)
            .unwrap();
        let cha = hourly(&mut m, &format!("c{i}"), 0.0);
        let dis = hourly(&mut m, &format!("d{i}"), 0.0);
        let soc = hourly(&mut m, &format!("s{i}"), 0.0);
        let z = zone_of(&s.zone);
        let keep = 1.0 - s.eta_sdc;
        for h in 0..h_len {
            let next = if s.is_lds {
                (h + 1) % h_len
            } else {
                let start = h - h % t_len;
                start + (h + 1 - start) % t_len
            };
            m.add_row(
                format!("soc_{i}_{h}"),
                Sense::Eq,
                0.0,
                [
                    (soc[next], 1.0),
                    (soc[h], -keep),
                    (cha[h], -s.eta_cha * dt),
                    (dis[h], dt / s.eta_dis),
                ],
            )
            .unwrap();
            m.add_row(
                format!("e_{i}_{h}"),
                Sense::Le,
                0.0,
                [(soc[h], 1.0), (e, -1.0)],
            )
            .unwrap();
            m.add_row(
                format!("pc_{i}_{h}"),
                Sense::Le,
                0.0,
                [(cha[h], 1.0), (p, -1.0)],
            )
            .unwrap();
            m.add_row(
                format!("pd_{i}_{h}"),
                Sense::Le,
                0.0,
                [(dis[h], 1.0), (p, -1.0)],
            )
            .unwrap();
            injections[z][h].push((dis[h], 1.0));
            injections[z][h].push((cha[h], -1.0));
        }
    }
    for (i, l) in config.lines.iter().enumerate() {
        let cap = m
            .add_variable(format!("lcap_{i}"), 0.0, inf, l.capex)
            .unwrap();
        let fwd = hourly(&mut m, &format!("f{i}"), 0.0);
        let rev = hourly(&mut m, &format!("r{i}"), 0.0);
        let (a, b) = (zone_of(&l.from), zone_of(&l.to));
        for h in 0..h_len {
            m.add_row(
                format!("lf_{i}_{h}"),
                Sense::Le,
                0.0,
                [(fwd[h], 1.0), (cap, -1.0)],
            )
            .unwrap();
            m.add_row(
                format!("lr_{i}_{h}"),
                Sense::Le,
                0.0,
                [(rev[h], 1.0), (cap, -1.0)],
            )
            .unwrap();
            injections[b][h].extend([(fwd[h], 1.0), (rev[h], -1.0)]);
            injections[a][h].extend([(fwd[h], -1.0), (rev[h], 1.0)]);
        }
    }
    for (z, zone) in config.zones.iter().enumerate() {
        let nse = hourly(&mut m, &format!("nse{z}"), dt * config.nse_penalty);
        let demand = ts.column(&format!("demand.{}", zone.name)).unwrap();
        for h in 0..h_len {
            let mut coeffs = injections[z][h].clone();
            coeffs.push((nse[h], 1.0));
            m.add_row(format!("bal_{z}_{h}"), Sense::Eq, demand[h], coeffs)
                .unwrap();
        }
    }
    let s = solve_reference(&m, &SimplexOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal, "full-resolution oracle");
    s.objective.unwrap()
}

/// `|a - b| / max(|a|, |b|)`, 0 when both are 0.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
