use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Mdp;

/// On-disk MDP: `{"S", "A", "gamma", "r": [[..]], "p": [[[..]]]}` with `p`
/// indexed `[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub gamma: f64,
    pub r: Vec<Vec<f64>>,
    pub p: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl MdpFile {
    pub fn from_mdp<T: Scalar>(mdp: &Mdp<T>) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let r = (0..ns)
            .map(|s| (0..na).map(|a| mdp.reward(s, a).as_f64()).collect())
            .collect();
        let p = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| mdp.row(s, a).iter().map(|x| x.as_f64()).collect())
                    .collect()
            })
            .collect();
        MdpFile {
            num_states: ns,
            num_actions: na,
            gamma: mdp.discount().as_f64(),
            r,
            p,
            provenance: None,
        }
    }

    pub fn to_mdp<T: Scalar>(&self) -> Result<Mdp<T>> {
        if self.p.len() != self.num_states {
            return Err(Error::invalid_mdp(
                "p",
                format!("has {} rows but S = {}", self.p.len(), self.num_states),
            ));
        }
        if let Some((s, _)) = self.p.iter().enumerate().find(|(_, rows)| rows.len() != self.num_actions) {
            return Err(Error::invalid_mdp(
                format!("p[{s}]"),
                format!("has {} actions but A = {}", self.p[s].len(), self.num_actions),
            ));
        }
        let conv = |x: &f64| T::lit(*x);
        let p: Vec<Vec<Vec<T>>> = self
            .p
            .iter()
            .map(|rows| rows.iter().map(|row| row.iter().map(conv).collect()).collect())
            .collect();
        let r: Vec<Vec<T>> = self.r.iter().map(|row| row.iter().map(conv).collect()).collect();
        Mdp::from_nested(&p, &r, T::lit(self.gamma))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()? + "\n").map_err(|e| Error::io(path, e))
    }
}

impl<T: Scalar> Mdp<T> {
    /// Loads and validates an MDP JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        MdpFile::read(path)?
            .to_mdp()
            .map_err(|e| e.context(path.display().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"S":2,"A":1,"gamma":0.9,"r":[[1.0],[0.0]],"p":[[[0.5,0.5]],[[0.0,1.0]]]}"#;

    #[test]
    fn parses_and_roundtrips() {
        let file = MdpFile::from_json(GOOD).unwrap();
        let mdp: Mdp<f64> = file.to_mdp().unwrap();
        assert_eq!(mdp.prob(0, 0, 1), 0.5);
        assert_eq!(MdpFile::from_mdp(&mdp), file);
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = MdpFile::from_json("{\n\"S\": 2,\n\"A\": }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn shape_error_reports_path() {
        let bad = GOOD.replace("[[0.0,1.0]]]", "[[0.0,1.0],[1.0,0.0]]]");
        let err = MdpFile::from_json(&bad).unwrap().to_mdp::<f64>().unwrap_err();
        assert!(err.to_string().contains("p[1]"), "{err}");
    }

    #[test]
    fn probability_error_reports_path() {
        let bad = GOOD.replace("[[0.5,0.5]]", "[[0.5,0.6]]");
        let err = MdpFile::from_json(&bad).unwrap().to_mdp::<f64>().unwrap_err();
        assert!(err.to_string().contains("p[0][0]"), "{err}");
    }
}
