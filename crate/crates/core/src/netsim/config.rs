use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::{place_users, Scenario, User};
use super::timing::{delta_p, TimingModel};
use crate::cpc::{pad_set, rs_cpc, select_params_prop2, tdma_set, RsCpcParams};
use crate::crt::{crt0_set, crt_set};
use crate::error::{Error, Result};
use crate::geo::{cluster_size, PlanFile, ReusePlan};
use crate::seq::SequenceSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Padding {
    /// `"auto"`: pad by the scenario's total asynchrony bound.
    Keyword(String),
    Slots(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceSource {
    /// One of `crt`, `crt0`, `rs_cpc`, `tdma`, `auto`, `file`.
    pub construction: String,
    #[serde(default)]
    pub p: Option<u64>,
    #[serde(default)]
    pub q: Option<u64>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub k: Option<u64>,
    /// TDMA cell count; defaults to the plan's cluster size.
    #[serde(default, rename = "G")]
    pub cells: Option<u64>,
    /// TDMA built-in silent slots.
    #[serde(default)]
    pub delta: Option<u64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub pad: Option<Padding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanSource {
    File { file: PathBuf },
    Inline(PlanFile),
    /// `"none"` to rely on per-user sequence indices, `"default"` for the
    /// plan sized by `R + h`.
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub tau_s: f64,
    #[serde(default, rename = "L")]
    pub frame_len: Option<usize>,
    #[serde(rename = "F")]
    pub frames: usize,
    #[serde(default)]
    pub delta_c_slots: u64,
    #[serde(rename = "R_m")]
    pub r_m: f64,
    pub h_m: f64,
    #[serde(rename = "M")]
    pub max_users: usize,
    #[serde(default)]
    pub v_mps: f64,
    #[serde(default = "one")]
    pub superframes: u64,
    #[serde(default)]
    pub slot_synchronized: bool,
    #[serde(default)]
    pub users: Option<Vec<User>>,
    #[serde(default)]
    pub random_users: Option<usize>,
    /// `[x0, y0, x1, y1]` for random placement.
    #[serde(default)]
    pub area: Option<[f64; 4]>,
    /// Placement seed for `random_users`.
    #[serde(default)]
    pub seed: Option<u64>,
    pub sequences: SequenceSource,
    #[serde(default)]
    pub plan: Option<PlanSource>,
}

fn one() -> u64 {
    1
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

fn need(v: Option<u64>, name: &str, construction: &str) -> Result<u64> {
    v.ok_or_else(|| bad(format!("construction {construction} needs {name}")))
}

fn read(base: &Path, path: &Path) -> Result<String> {
    let full = base.join(path);
    std::fs::read_to_string(&full).map_err(|e| bad(format!("cannot read {}: {e}", full.display())))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    fn default_plan(&self) -> Result<ReusePlan> {
        ReusePlan::new(self.r_m + self.h_m, self.h_m, cluster_size(self.r_m + self.h_m, self.h_m))
    }

    fn plan(&self, base: &Path, labels: Option<&[String]>) -> Result<Option<ReusePlan>> {
        match &self.plan {
            None => Ok(Some(self.default_plan()?)),
            Some(PlanSource::Keyword(k)) if k == "default" => Ok(Some(self.default_plan()?)),
            Some(PlanSource::Keyword(k)) if k == "none" => Ok(None),
            Some(PlanSource::Keyword(k)) => Err(bad(format!("unknown plan keyword {k:?}"))),
            Some(PlanSource::Inline(file)) => ReusePlan::from_file(file, labels).map(Some),
            Some(PlanSource::File { file }) => {
                let parsed: PlanFile =
                    serde_json::from_str(&read(base, file)?).map_err(|e| Error::Parse(e.to_string()))?;
                ReusePlan::from_file(&parsed, labels).map(Some)
            }
        }
    }

    fn timing_for(&self, frame_len: usize) -> Result<TimingModel> {
        let dp = if self.slot_synchronized { 0 } else { delta_p(self.r_m, self.tau_s) };
        TimingModel::new(self.tau_s, frame_len, self.frames, self.delta_c_slots, dp)
    }

    fn base_set(&self, base: &Path, cells: Option<u64>) -> Result<SequenceSet> {
        let src = &self.sequences;
        let c = src.construction.as_str();
        match c {
            "crt" => crt_set(need(src.p, "p", c)?, need(src.q, "q", c)?),
            "crt0" => crt0_set(need(src.p, "p", c)?, need(src.q, "q", c)?),
            "rs_cpc" => rs_cpc(RsCpcParams::new(need(src.n, "n", c)?, need(src.p, "p", c)?, need(src.k, "k", c)?)?),
            "tdma" => {
                let g = src.cells.or(cells).ok_or_else(|| bad("tdma needs G or a plan"))?;
                tdma_set(g as usize, src.delta.unwrap_or(0) as usize)
            }
            "auto" => {
                let g = cells.ok_or_else(|| bad("auto sequences need a plan"))?;
                rs_cpc(select_params_prop2(self.max_users as u64, g)?.params)
            }
            "file" => {
                let path = src.path.as_ref().ok_or_else(|| bad("file sequences need a path"))?;
                SequenceSet::parse_any(&read(base, path)?)
            }
            other => Err(bad(format!("unknown construction {other:?}"))),
        }
    }

    /// Builds the scenario; relative file references resolve against
    /// `base`.
    pub fn build(&self, base: &Path) -> Result<Scenario> {
        let provisional = self.plan(base, None)?;
        let set = self.base_set(base, provisional.as_ref().map(|p| p.g))?;
        let pad = match &self.sequences.pad {
            None => 0,
            Some(Padding::Slots(d)) => *d,
            Some(Padding::Keyword(k)) if k == "auto" => {
                let dp = if self.slot_synchronized { 0 } else { delta_p(self.r_m, self.tau_s) };
                self.delta_c_slots + dp
            }
            Some(Padding::Keyword(k)) => return Err(bad(format!("unknown pad keyword {k:?}"))),
        };
        let set = if pad > 0 { pad_set(&set, pad as usize)? } else { set };
        let period = set.period().ok_or_else(|| bad("empty sequence set"))?;
        let frame_len = self.frame_len.unwrap_or(period);
        let plan = self.plan(base, Some(set.labels()))?;

        let users = match (&self.users, self.random_users) {
            (Some(users), None) => users.clone(),
            (None, Some(count)) => {
                let area = self.area.ok_or_else(|| bad("random_users needs an area"))?;
                place_users(count, area, self.r_m, self.h_m, self.max_users, self.seed.unwrap_or(0))?
                    .into_iter()
                    .enumerate()
                    .map(|(i, (x, y))| User::at(i as u64, x, y))
                    .collect()
            }
            _ => return Err(bad("give exactly one of users and random_users")),
        };
        let scenario = Scenario {
            timing: self.timing_for(frame_len)?,
            r: self.r_m,
            h: self.h_m,
            max_users: self.max_users,
            speed: self.v_mps,
            users,
            set,
            plan,
            slot_synchronized: self.slot_synchronized,
            superframes: self.superframes,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
