use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Reset,
    YawAlign,
    ForwardApproach,
    DepthAdjust,
    CloseRange,
    Grasp,
    DragVerify,
    RecoverRegrasp,
    RecoverBackup,
    Done,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Reset,
        Stage::YawAlign,
        Stage::ForwardApproach,
        Stage::DepthAdjust,
        Stage::CloseRange,
        Stage::Grasp,
        Stage::DragVerify,
        Stage::RecoverRegrasp,
        Stage::RecoverBackup,
        Stage::Done,
    ];

    /// Stages that servo on the target centroid and watch the image margin.
    pub fn is_servo(self) -> bool {
        matches!(self, Stage::YawAlign | Stage::ForwardApproach | Stage::DepthAdjust | Stage::CloseRange)
    }

    pub fn index(self) -> u8 {
        Stage::ALL.iter().position(|&s| s == self).expect("listed") as u8
    }
}

/// The transition graph. Forward progress runs Reset through DragVerify;
/// recovery edges lead back to YawAlign; any live stage may end the episode.
/// YawAlign to YawAlign is a retarget.
pub fn is_documented(from: Stage, to: Stage) -> bool {
    use Stage::*;
    if from == Done {
        return false;
    }
    if to == Done {
        return true;
    }
    matches!(
        (from, to),
        (Reset, YawAlign)
            | (YawAlign, ForwardApproach)
            | (ForwardApproach, DepthAdjust)
            | (DepthAdjust, CloseRange)
            | (CloseRange, Grasp)
            | (Grasp, DragVerify)
            | (DragVerify, RecoverRegrasp)
            | (RecoverRegrasp, YawAlign)
            | (RecoverBackup, YawAlign)
            | (YawAlign | ForwardApproach | DepthAdjust | CloseRange | Grasp, RecoverBackup)
            | (YawAlign | ForwardApproach | DepthAdjust | CloseRange, YawAlign)
    )
}

/// One stage change, written as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub from: Stage,
    pub to: Stage,
    pub reason: String,
}

pub fn write_trace(mut w: impl Write, trace: &[Transition]) -> std::io::Result<()> {
    for tr in trace {
        serde_json::to_writer(&mut w, tr)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(r: impl BufRead) -> std::io::Result<Vec<Transition>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn done_is_terminal_and_reachable() {
        for s in Stage::ALL {
            assert!(!is_documented(Stage::Done, s));
            if s != Stage::Done {
                assert!(is_documented(s, Stage::Done));
            }
        }
        assert!(!is_documented(Stage::YawAlign, Stage::Grasp));
        assert!(!is_documented(Stage::DragVerify, Stage::YawAlign));
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = vec![
            Transition { t: 0.0, from: Stage::Reset, to: Stage::YawAlign, reason: "target 2".into() },
            Transition { t: 4.25, from: Stage::YawAlign, to: Stage::ForwardApproach, reason: "aligned".into() },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"t\":0.0,\"from\":\"Reset\",\"to\":\"YawAlign\""));
        assert_eq!(read_trace(&buf[..]).unwrap(), trace);
    }
}
