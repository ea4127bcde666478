//! Game files: one row per game, home team first.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};
use crate::kernels::{InputSpace, SeasonCalendar};
use crate::likelihood::GameObservation;
use crate::prediction::{expert_scores, ExpertLine, TestGame};

/// One row of the game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub date: NaiveDate,
    pub season: String,
    pub home_team: String,
    pub away_team: String,
    pub home_score: f64,
    pub away_score: f64,
    #[serde(default)]
    pub over_under: Option<f64>,
    #[serde(default)]
    pub home_spread: Option<f64>,
}

impl GameRecord {
    fn check(&self, line: u64) -> Result<()> {
        let bad = |message: String| Err(DpmfError::Data { line, message });
        if self.home_team.trim().is_empty() || self.away_team.trim().is_empty() {
            return bad("empty team id".to_string());
        }
        if self.home_team == self.away_team {
            return bad(format!("team {} plays itself", self.home_team));
        }
        for (name, v) in [("home_score", self.home_score), ("away_score", self.away_score)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if let Some(ou) = self.over_under {
            if !(ou > 0.0 && ou.is_finite()) {
                return bad(format!("over_under must be positive, got {ou}"));
            }
        }
        if let Some(sp) = self.home_spread {
            if !sp.is_finite() {
                return bad(format!("home_spread must be finite, got {sp}"));
            }
        }
        if self.over_under.is_some() != self.home_spread.is_some() {
            return bad("over_under and home_spread must be given together".to_string());
        }
        Ok(())
    }

    pub fn line(&self) -> Option<ExpertLine> {
        match (self.over_under, self.home_spread) {
            (Some(ou), Some(sp)) => ExpertLine::new(ou, sp).ok(),
            _ => None,
        }
    }
}

/// Parses game rows; errors name the 1-based file line.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<GameRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<GameRecord>() {
        let rec = row.map_err(|e| DpmfError::Data {
            line: e.position().map_or(0, |p| p.line()),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        rec.check(out.len() as u64 + 2)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[GameRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Games with dense team ids, week coordinates and the season calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<GameRecord>,
    /// Team names sorted; the index is the member id.
    pub teams: Vec<String>,
    /// Season labels in chronological order.
    pub seasons: Vec<String>,
    pub home: Vec<usize>,
    pub away: Vec<usize>,
    /// Whole weeks since the first season's first game.
    pub weeks: Vec<usize>,
    pub season_of: Vec<usize>,
    pub calendar: SeasonCalendar,
    pub origin: Option<NaiveDate>,
}

impl Dataset {
    pub fn from_records(records: Vec<GameRecord>) -> Result<Self> {
        let teams: Vec<String> = records
            .iter()
            .flat_map(|r| [r.home_team.clone(), r.away_team.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let team_id = |t: &str| teams.binary_search_by(|x| x.as_str().cmp(t)).expect("team indexed");

        let mut first_date: BTreeMap<&str, NaiveDate> = BTreeMap::new();
        for r in &records {
            let e = first_date.entry(r.season.as_str()).or_insert(r.date);
            *e = (*e).min(r.date);
        }
        let mut order: Vec<(&str, NaiveDate)> = first_date.into_iter().collect();
        order.sort_by_key(|&(s, d)| (d, s.to_string()));
        let seasons: Vec<String> = order.iter().map(|(s, _)| s.to_string()).collect();
        let origin = order.first().map(|&(_, d)| d);

        let mut weeks = Vec::with_capacity(records.len());
        let mut season_of = Vec::with_capacity(records.len());
        let mut bounds: Vec<Option<(usize, usize)>> = vec![None; seasons.len()];
        for (i, r) in records.iter().enumerate() {
            let days = (r.date - origin.expect("records present")).num_days();
            if days < 0 {
                return Err(DpmfError::Data {
                    line: i as u64 + 2,
                    message: format!("date {} precedes the first season", r.date),
                });
            }
            let w = (days / 7) as usize;
            let s = seasons.iter().position(|x| *x == r.season).expect("season indexed");
            weeks.push(w);
            season_of.push(s);
            bounds[s] = Some(match bounds[s] {
                None => (w, w),
                Some((a, b)) => (a.min(w), b.max(w)),
            });
        }
        let calendar = SeasonCalendar::new(
            bounds
                .iter()
                .map(|b| {
                    let (a, e) = b.expect("every season has a game");
                    (a as f64, e as f64)
                })
                .collect(),
        )?;
        let home = records.iter().map(|r| team_id(&r.home_team)).collect();
        let away = records.iter().map(|r| team_id(&r.away_team)).collect();
        Ok(Self {
            records,
            teams,
            seasons,
            home,
            away,
            weeks,
            season_of,
            calendar,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn team_id(&self, name: &str) -> Result<usize> {
        self.teams
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| DpmfError::UnknownMember(name.to_string()))
    }

    /// Week coordinate of an arbitrary date.
    pub fn week_of(&self, date: NaiveDate) -> Result<f64> {
        let origin = self.origin.ok_or(DpmfError::Empty("dataset"))?;
        let days = (date - origin).num_days();
        if days < 0 {
            return Err(DpmfError::BeforeFirstSeason {
                t: days as f64 / 7.0,
                first_start: 0.0,
            });
        }
        Ok((days / 7) as f64)
    }

    /// Game `i` with the home team as row member.
    pub fn observation(&self, i: usize, space: &InputSpace) -> GameObservation {
        let r = &self.records[i];
        GameObservation {
            row_member: self.home[i],
            col_member: self.away[i],
            side_info: space.point(self.weeks[i] as f64, true),
            score_mn: r.home_score,
            score_nm: r.away_score,
        }
    }

    pub fn observations(&self, ids: &[usize], space: &InputSpace) -> Vec<GameObservation> {
        ids.iter().map(|&i| self.observation(i, space)).collect()
    }

    pub fn test_game(&self, i: usize, space: &InputSpace) -> TestGame {
        TestGame {
            row_member: self.home[i],
            col_member: self.away[i],
            side_info: space.point(self.weeks[i] as f64, true),
        }
    }

    /// Expert forecast as (home, away), when the row carries a line.
    pub fn expert_prediction(&self, i: usize) -> Option<(f64, f64)> {
        self.records[i].line().map(|l| {
            let (away, home) = expert_scores(&l);
            (home, away)
        })
    }

    pub fn has_lines(&self) -> bool {
        self.records.iter().any(|r| r.line().is_some())
    }
}

pub fn ingest(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    Dataset::from_records(read_records(f)?)
}
