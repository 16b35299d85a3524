use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Job, ResourceVector};
use crate::rartime::UtilitySpec;

use super::cluster::{num, range};
use super::{parse_kv, HarnessError};

pub const TRACE_HEADER: [&str; 10] =
    ["id", "arrival", "N", "l_gpu", "l_mem", "F_gpu", "F_mem", "bandwidth_bps", "zeta", "utility_kind"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalPattern {
    /// Arrival slots drawn uniformly from `1..=horizon`.
    Uniform,
    /// Exponential interarrival gaps with mean `horizon / jobs`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFamily {
    Sigmoid,
    Sqrt,
    Log,
    /// Sqrt or log, chosen per job.
    Concave,
}

/// Per-field bounds applied to generated and loaded jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceRanges {
    pub max_workers: (u32, u32),
    /// Worker-slot budget, `F^r = budget · l^r`.
    pub budget: (f64, f64),
    pub efficiency: (f64, f64),
    pub bandwidth_bps: (f64, f64),
    pub gpu_per_worker: (u32, u32),
    pub mem_per_worker: (u32, u32),
    pub priority: (f64, f64),
    pub sensitivity: (f64, f64),
    pub midpoint: (f64, f64),
}

impl Default for TraceRanges {
    fn default() -> Self {
        TraceRanges {
            max_workers: (1, 5),
            budget: (1000.0, 6000.0),
            efficiency: (50.0, 500.0),
            bandwidth_bps: (1e8, 5e9),
            gpu_per_worker: (1, 1),
            mem_per_worker: (4, 16),
            priority: (1.0, 100.0),
            sensitivity: (0.01, 0.99),
            midpoint: (300.0, 3000.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub jobs: usize,
    pub horizon: u32,
    pub arrival: ArrivalPattern,
    pub utility: UtilityFamily,
    pub ranges: TraceRanges,
    pub gpu_only: bool,
    pub seed: u64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            jobs: 40,
            horizon: 50,
            arrival: ArrivalPattern::Uniform,
            utility: UtilityFamily::Sigmoid,
            ranges: TraceRanges::default(),
            gpu_only: false,
            seed: 1,
        }
    }
}

impl TraceSpec {
    /// Parses `jobs=40,horizon=50,arrival=poisson,utility=sqrt,seed=3`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut spec = TraceSpec::default();
        for (k, v) in parse_kv(text)? {
            let r = &mut spec.ranges;
            match k.as_str() {
                "jobs" => spec.jobs = num(&k, &v)?,
                "horizon" | "slots" => spec.horizon = num(&k, &v)?,
                "arrival" => {
                    spec.arrival = match v.as_str() {
                        "uniform" => ArrivalPattern::Uniform,
                        "poisson" => ArrivalPattern::Poisson,
                        _ => return Err(HarnessError::Config(format!("unknown arrival pattern '{v}'"))),
                    }
                }
                "utility" => {
                    spec.utility = match v.as_str() {
                        "sigmoid" => UtilityFamily::Sigmoid,
                        "sqrt" => UtilityFamily::Sqrt,
                        "log" => UtilityFamily::Log,
                        "concave" => UtilityFamily::Concave,
                        _ => return Err(HarnessError::Config(format!("unknown utility family '{v}'"))),
                    }
                }
                "workers" => r.max_workers = range(&k, &v)?,
                "budget" => r.budget = range(&k, &v)?,
                "zeta" => r.efficiency = range(&k, &v)?,
                "bandwidth" => r.bandwidth_bps = range(&k, &v)?,
                "gpu" => r.gpu_per_worker = range(&k, &v)?,
                "mem" => r.mem_per_worker = range(&k, &v)?,
                "gpu_only" => spec.gpu_only = num(&k, &v)?,
                "seed" => spec.seed = num(&k, &v)?,
                _ => return Err(HarnessError::Config(format!("unknown trace key '{k}'"))),
            }
        }
        Ok(spec)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Synthetic jobs, sorted by arrival with ids `1..=jobs` in that order.
pub fn generate_trace(spec: &TraceSpec) -> Result<Vec<Job>, HarnessError> {
    if spec.horizon < 1 {
        return Err(HarnessError::Config("trace horizon must be >= 1".into()));
    }
    let r = &spec.ranges;
    if r.max_workers.0 < 1 || r.max_workers.0 > r.max_workers.1 || r.gpu_per_worker.0 > r.gpu_per_worker.1 {
        return Err(HarnessError::Config("integer ranges must satisfy 1 <= min <= max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut arrivals: Vec<u32> = match spec.arrival {
        ArrivalPattern::Uniform => (0..spec.jobs).map(|_| rng.random_range(1..=spec.horizon)).collect(),
        ArrivalPattern::Poisson => {
            let mean = spec.horizon as f64 / spec.jobs.max(1) as f64;
            let mut t = 0.0;
            (0..spec.jobs)
                .map(|_| {
                    let u: f64 = rng.random();
                    t += -mean * (1.0 - u).ln();
                    (t.ceil() as u32).clamp(1, spec.horizon)
                })
                .collect()
        }
    };
    arrivals.sort_unstable();
    let mut jobs = Vec::with_capacity(spec.jobs);
    for (k, arrival) in arrivals.into_iter().enumerate() {
        let n = rng.random_range(r.max_workers.0..=r.max_workers.1);
        let gpu = rng.random_range(r.gpu_per_worker.0..=r.gpu_per_worker.1) as f64;
        let mem = rng.random_range(r.mem_per_worker.0..=r.mem_per_worker.1) as f64;
        let budget = uniform(&mut rng, r.budget).round();
        let bandwidth = uniform(&mut rng, r.bandwidth_bps).round();
        let efficiency = uniform(&mut rng, r.efficiency);
        let utility = match spec.utility {
            UtilityFamily::Sigmoid => UtilitySpec::Sigmoid {
                priority: uniform(&mut rng, r.priority),
                sensitivity: uniform(&mut rng, r.sensitivity),
                midpoint: uniform(&mut rng, r.midpoint),
            },
            UtilityFamily::Sqrt => UtilitySpec::Sqrt { c: uniform(&mut rng, (1.0, 10.0)) },
            UtilityFamily::Log => UtilitySpec::Log,
            UtilityFamily::Concave => {
                if rng.random_bool(0.5) {
                    UtilitySpec::Sqrt { c: uniform(&mut rng, (1.0, 10.0)) }
                } else {
                    UtilitySpec::Log
                }
            }
        };
        let (demand, budget_v) = if spec.gpu_only {
            (vec![gpu], vec![budget * gpu])
        } else {
            (vec![gpu, mem], vec![budget * gpu, budget * mem])
        };
        jobs.push(Job {
            id: k as u32 + 1,
            arrival,
            max_workers: n,
            demand: ResourceVector(demand),
            budget: ResourceVector(budget_v),
            bandwidth,
            efficiency,
            utility,
            rar: None,
        });
    }
    Ok(jobs)
}

/// Jobs read from a trace file plus the clamping warnings raised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedTrace {
    pub jobs: Vec<Job>,
    pub warnings: Vec<String>,
}

/// Reads the comma-separated trace format. Records are validated, clamped
/// into `ranges` with a warning per clamp, and sorted by arrival.
pub fn load_trace(path: &Path, ranges: &TraceRanges, gpu_only: bool) -> Result<LoadedTrace, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    read_trace(file, ranges, gpu_only)
}

pub fn read_trace(input: impl std::io::Read, ranges: &TraceRanges, gpu_only: bool) -> Result<LoadedTrace, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut out = LoadedTrace::default();
    let header_ok = match reader.headers() {
        Ok(h) => h.is_empty() || h.iter().take(TRACE_HEADER.len()).eq(TRACE_HEADER.iter().copied()),
        Err(e) => return Err(HarnessError::Parse { line: 1, message: e.to_string() }),
    };
    if !header_ok {
        return Err(HarnessError::Parse { line: 1, message: format!("header must start with {}", TRACE_HEADER.join(",")) });
    }
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| HarnessError::Parse { line, message };
        if record.len() < TRACE_HEADER.len() {
            return Err(err(format!("expected at least {} fields, found {}", TRACE_HEADER.len(), record.len())));
        }
        let field = |i: usize| -> Result<f64, HarnessError> {
            record[i].parse::<f64>().map_err(|_| err(format!("field {} is not a number: '{}'", TRACE_HEADER[i], &record[i])))
        };
        let id: u32 = record[0].parse().map_err(|_| err(format!("bad id '{}'", &record[0])))?;
        let arrival: u32 = record[1].parse().map_err(|_| err(format!("bad arrival '{}'", &record[1])))?;
        if arrival == 0 {
            return Err(err("arrival 0 is invalid; slots start at 1".into()));
        }
        let mut clamp = |name: &str, v: f64, (lo, hi): (f64, f64)| -> f64 {
            let c = v.clamp(lo, hi);
            if c != v {
                out.warnings.push(format!("line {line}: job {id} {name} {v} clamped to {c}"));
            }
            c
        };
        let n = clamp("N", field(2)?, (ranges.max_workers.0 as f64, ranges.max_workers.1 as f64)).round() as u32;
        let l_gpu = field(3)?;
        let l_mem = field(4)?;
        let (f_gpu, f_mem) = (field(5)?, field(6)?);
        let bandwidth = clamp("bandwidth_bps", field(7)?, ranges.bandwidth_bps);
        let efficiency = clamp("zeta", field(8)?, ranges.efficiency);
        let params: Vec<f64> = (TRACE_HEADER.len()..record.len())
            .filter(|&i| !record[i].is_empty())
            .map(|i| record[i].parse::<f64>().map_err(|_| err(format!("bad utility parameter '{}'", &record[i]))))
            .collect::<Result<_, _>>()?;
        let utility = UtilitySpec::from_parts(&record[9], &params).map_err(err)?;
        let (demand, budget) = if gpu_only { (vec![l_gpu], vec![f_gpu]) } else { (vec![l_gpu, l_mem], vec![f_gpu, f_mem]) };
        let mut job = Job {
            id,
            arrival,
            max_workers: n,
            demand: ResourceVector(demand),
            budget: ResourceVector(budget),
            bandwidth,
            efficiency,
            utility,
            rar: None,
        };
        // budget range is in worker-slots
        let slots = job.budget_worker_slots();
        if slots.is_finite() {
            let c = clamp("budget worker-slots", slots, ranges.budget);
            if c != slots {
                job.budget = job.budget.scaled(c / slots);
            }
        }
        job.validate(job.demand.len()).map_err(|e| err(e.to_string()))?;
        out.jobs.push(job);
    }
    out.jobs.sort_by_key(|j| (j.arrival, j.id));
    Ok(out)
}

pub fn write_trace(jobs: &[Job], out: impl std::io::Write) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for j in jobs {
        let get = |v: &ResourceVector, r: usize| v.0.get(r).copied().unwrap_or(0.0);
        let mut row = vec![
            j.id.to_string(),
            j.arrival.to_string(),
            j.max_workers.to_string(),
            get(&j.demand, 0).to_string(),
            get(&j.demand, 1).to_string(),
            get(&j.budget, 0).to_string(),
            get(&j.budget, 1).to_string(),
            j.bandwidth.to_string(),
            j.efficiency.to_string(),
            j.utility.kind().to_string(),
        ];
        row.extend(j.utility.params().iter().map(|p| p.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(())
}

/// `gen:` spec or a trace file path.
pub fn load_trace_arg(arg: &str, gpu_only: bool) -> Result<LoadedTrace, HarnessError> {
    match arg.strip_prefix("gen:") {
        Some(spec) => {
            let spec = TraceSpec { gpu_only, ..TraceSpec::parse(spec)? };
            Ok(LoadedTrace { jobs: generate_trace(&spec)?, warnings: Vec::new() })
        }
        None => load_trace(Path::new(arg), &TraceRanges::default(), gpu_only),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "id,arrival,N,l_gpu,l_mem,F_gpu,F_mem,bandwidth_bps,zeta,utility_kind,utility_params\n";

    fn read(body: &str) -> Result<LoadedTrace, HarnessError> {
        read_trace(format!("{HEAD}{body}").as_bytes(), &TraceRanges::default(), false)
    }

    #[test]
    fn empty_file() {
        assert!(read("").unwrap().jobs.is_empty());
        assert!(read_trace("".as_bytes(), &TraceRanges::default(), false).unwrap().jobs.is_empty());
    }

    #[test]
    fn zero_arrival_rejected() {
        match read("1,0,2,1,8,2000,16000,1e9,100,sqrt,2\n") {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clamps_and_sorts() {
        let t = read("2,5,9,1,8,2000,16000,1e9,100,sigmoid,10,0.5,400\n1,3,2,1,8,2000,16000,1e9,100,log\n").unwrap();
        assert_eq!(t.jobs.iter().map(|j| j.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(t.jobs[1].max_workers, 5);
        assert_eq!(t.warnings.len(), 1);
        assert!(read("1,3,2,1,8,2000,16000,1e9,100,cubic,1\n").is_err());
    }

    #[test]
    fn generate_write_read_round_trip() {
        let spec = TraceSpec { jobs: 30, seed: 5, ..Default::default() };
        let jobs = generate_trace(&spec).unwrap();
        assert_eq!(jobs, generate_trace(&spec).unwrap());
        assert!(jobs.windows(2).all(|w| w[0].arrival <= w[1].arrival));
        let mut buf = Vec::new();
        write_trace(&jobs, &mut buf).unwrap();
        let back = read_trace(buf.as_slice(), &TraceRanges::default(), false).unwrap();
        assert!(back.warnings.is_empty(), "{:?}", back.warnings);
        assert_eq!(back.jobs, jobs);
    }

    #[test]
    fn poisson_arrivals_in_horizon() {
        let spec = TraceSpec { jobs: 100, arrival: ArrivalPattern::Poisson, ..Default::default() };
        let jobs = generate_trace(&spec).unwrap();
        assert!(jobs.iter().all(|j| (1..=50).contains(&j.arrival)));
    }
}
