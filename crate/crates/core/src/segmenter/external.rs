//! Segmenter hosted in a child process, spoken to over [`super::protocol`].

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{parse_capabilities, Op, Request, Response, WireImage, WirePrompt};
use super::{Capabilities, Prompt, SegmentResult2D, Segmenter};
use crate::error::{Error, Result};
use crate::volume::Image2D;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const TIMEOUT_ENV: &str = "TUBETRACE_BACKEND_TIMEOUT_SECS";

/// One session with an external backend process. Requests are strictly
/// serial; use several sessions for parallelism.
pub struct ExternalSegmenter {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
    capabilities: Capabilities,
    broken: bool,
}

impl std::fmt::Debug for ExternalSegmenter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSegmenter")
            .field("pid", &self.child.id())
            .field("next_id", &self.next_id)
            .field("timeout", &self.timeout)
            .finish()
    }
}

/// Timeout from the environment, falling back to [`DEFAULT_TIMEOUT`].
pub fn timeout_from_env() -> Duration {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|s| *s > 0.0)
        .map(Duration::from_secs_f64)
        .unwrap_or(DEFAULT_TIMEOUT)
}

impl ExternalSegmenter {
    /// Spawns `sh -c <command>` and performs the init handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        Self::spawn_command(cmd, timeout)
    }

    pub fn spawn_command(mut cmd: Command, timeout: Duration) -> Result<Self> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start backend: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session = Self {
            child,
            stdin,
            lines: rx,
            next_id: 1,
            timeout,
            capabilities: Capabilities {
                prompted_segmentation: false,
                auto_masks: false,
            },
            broken: false,
        };
        let resp = session.call(Op::Init {
            config: serde_json::json!({}),
        })?;
        if resp.ok != Some(true) {
            return Err(Error::Protocol("init not acknowledged".into()));
        }
        session.capabilities = parse_capabilities(resp.capabilities.as_deref().unwrap_or_default());
        Ok(session)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn exit_error(&mut self) -> Error {
        match self.child.wait() {
            Ok(status) => Error::Backend(format!("backend process exited ({status})")),
            Err(e) => Error::Backend(format!("backend process lost: {e}")),
        }
    }

    fn call(&mut self, op: Op) -> Result<Response> {
        if self.broken {
            return Err(Error::Backend("session unusable after an earlier failure".into()));
        }
        let resp = self.call_inner(op).inspect_err(|_| self.broken = true)?;
        if let Some(msg) = resp.error {
            return Err(Error::Backend(format!("backend reported: {msg}")));
        }
        Ok(resp)
    }

    fn call_inner(&mut self, op: Op) -> Result<Response> {
        let id = self.next_id;
        self.next_id += 1;
        let line = serde_json::to_string(&Request { id, op })?;
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(Error::Backend("backend stdin closed".into()));
        };
        if stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .is_err()
        {
            return Err(self.exit_error());
        }
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(Error::Backend(format!("reading backend output: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(self.exit_error()),
        };
        let resp: Response = serde_json::from_str(&reply)
            .map_err(|e| Error::Protocol(format!("unparseable response {reply:?}: {e}")))?;
        if resp.id != id as i64 {
            return Err(Error::Protocol(format!("response id {} for request {id}", resp.id)));
        }
        Ok(resp)
    }
}

impl Segmenter for ExternalSegmenter {
    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        let resp = self.call(Op::Segment {
            image: WireImage::encode(image),
            prompt: WirePrompt::from(prompt),
        })?;
        let (Some(mask), Some(prob)) = (resp.mask, resp.prob) else {
            self.broken = true;
            return Err(Error::Protocol("segment response lacks mask or prob".into()));
        };
        if (mask.rows, mask.cols) != (image.rows(), image.cols()) {
            self.broken = true;
            return Err(Error::Protocol(format!(
                "mask {}x{} for a {}x{} image",
                mask.rows,
                mask.cols,
                image.rows(),
                image.cols()
            )));
        }
        let mask = mask.decode().inspect_err(|_| self.broken = true)?;
        Ok(SegmentResult2D { mask, probability: prob })
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        if !self.capabilities.auto_masks {
            return Err(Error::CapabilityMissing("auto_masks"));
        }
        let resp = self.call(Op::Auto {
            image: WireImage::encode(image),
        })?;
        let Some(masks) = resp.masks else {
            self.broken = true;
            return Err(Error::Protocol("auto response lacks masks".into()));
        };
        masks
            .into_iter()
            .map(|m| {
                Ok(SegmentResult2D {
                    mask: m.mask.decode()?,
                    probability: m.prob,
                })
            })
            .collect()
    }
}

impl Drop for ExternalSegmenter {
    fn drop(&mut self) {
        if !self.broken {
            self.timeout = self.timeout.min(Duration::from_secs(2));
            let _ = self.call_inner(Op::Shutdown);
        }
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::segment;

    // tiny shell backends: each answers init, then behaves as scripted
    fn scripted(after_init: &str) -> String {
        format!(
            "read l; echo '{{\"id\":1,\"ok\":true,\"capabilities\":[\"segment\"]}}'; {after_init}"
        )
    }

    fn image() -> Image2D {
        Image2D::new(2, 2, vec![0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn handshake_reads_capabilities() {
        let s = ExternalSegmenter::spawn(&scripted("cat > /dev/null"), Duration::from_secs(5)).unwrap();
        assert!(s.capabilities().prompted_segmentation);
        assert!(!s.capabilities().auto_masks);
    }

    #[test]
    fn well_formed_reply_decodes() {
        let cmd = scripted(r#"read l; echo '{"id":2,"mask":{"rows":2,"cols":2,"rle":[1,3]},"prob":0.75}'; cat > /dev/null"#);
        let mut s = ExternalSegmenter::spawn(&cmd, Duration::from_secs(5)).unwrap();
        let r = segment(&mut s, &image(), &Prompt::point(1, 1), 0).unwrap();
        assert_eq!(r.mask.area(), 3);
        assert_eq!(r.probability, 0.75);
    }

    #[test]
    fn bad_rle_sum_is_protocol_error() {
        let cmd = scripted(r#"read l; echo '{"id":2,"mask":{"rows":2,"cols":2,"rle":[1,2]},"prob":0.9}'; cat > /dev/null"#);
        let mut s = ExternalSegmenter::spawn(&cmd, Duration::from_secs(5)).unwrap();
        assert!(matches!(s.segment_raw(&image(), &Prompt::point(0, 0)), Err(Error::Protocol(_))));
        assert!(s.segment_raw(&image(), &Prompt::point(0, 0)).is_err());
    }

    #[test]
    fn backend_error_object_surfaces() {
        let cmd = scripted(r#"read l; echo '{"id":2,"error":"out of memory"}'; cat > /dev/null"#);
        let mut s = ExternalSegmenter::spawn(&cmd, Duration::from_secs(5)).unwrap();
        let err = s.segment_raw(&image(), &Prompt::point(0, 0)).unwrap_err();
        assert!(err.to_string().contains("out of memory"));
    }

    #[test]
    fn process_death_is_reported() {
        let mut s = ExternalSegmenter::spawn(&scripted("exit 3"), Duration::from_secs(5)).unwrap();
        let err = s.segment_raw(&image(), &Prompt::point(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Backend(_)), "{err}");
    }

    #[test]
    fn silence_times_out() {
        let mut s = ExternalSegmenter::spawn(&scripted("sleep 5"), Duration::from_millis(200)).unwrap();
        assert!(matches!(s.segment_raw(&image(), &Prompt::point(0, 0)), Err(Error::Timeout(_))));
    }

    #[test]
    fn wrong_id_rejected() {
        let cmd = scripted(r#"read l; echo '{"id":9,"mask":{"rows":2,"cols":2,"rle":[4]},"prob":0.9}'; cat > /dev/null"#);
        let mut s = ExternalSegmenter::spawn(&cmd, Duration::from_secs(5)).unwrap();
        assert!(matches!(s.segment_raw(&image(), &Prompt::point(0, 0)), Err(Error::Protocol(_))));
    }

    #[test]
    fn missing_executable() {
        assert!(ExternalSegmenter::spawn("exec /nonexistent/backend", Duration::from_secs(5)).is_err());
    }
}
