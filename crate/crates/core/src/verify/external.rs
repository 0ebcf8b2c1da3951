//! Adapter for an external compiler-style checker: one candidate source file
//! per job under `<workdir>/<job_id>/main.<ext>`, the checker invoked as a
//! child process with the file as final argument. Exit code 0 is a pass;
//! otherwise diagnostics are parsed from stderr lines of the form
//! `<file>:<line>:<col>: error: <msg>`. A job whose wall clock exceeds its
//! timeout is terminated (grace period, then forced kill) and classified as
//! a timeout.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use once_cell::sync::Lazy;
use regex::Regex;

use crate::backend::BackendError;

use super::{source_unit, CheckJob, CheckerBackend, Diagnostic, Verdict, KILL_GRACE_MS};

static DIAGNOSTIC_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^(?P<file>[^:]+):(?P<line>\d+):(?P<col>\d+): error: (?P<msg>.*)$").unwrap()
});

const POLL_INTERVAL: Duration = Duration::from_millis(10);

pub struct ExternalChecker {
    executable: PathBuf,
    args: Vec<String>,
    workdir: PathBuf,
    source_ext: String,
    kill_grace: Duration,
}

impl ExternalChecker {
    pub fn new(executable: PathBuf, args: Vec<String>, workdir: PathBuf, source_ext: &str) -> Self {
        ExternalChecker {
            executable,
            args,
            workdir,
            source_ext: source_ext.to_string(),
            kill_grace: Duration::from_millis(KILL_GRACE_MS),
        }
    }

    #[cfg(test)]
    fn with_kill_grace(mut self, grace: Duration) -> Self {
        self.kill_grace = grace;
        self
    }
}

impl CheckerBackend for ExternalChecker {
    fn check(&self, job: &CheckJob) -> Result<Verdict, BackendError> {
        let started = Instant::now();
        let job_dir = self.workdir.join(&job.job_id);
        std::fs::create_dir_all(&job_dir)?;
        let source_path = job_dir.join(format!("main.{}", self.source_ext));
        std::fs::write(&source_path, source_unit(&job.statement, &job.proof_text))?;

        let mut command = Command::new(&self.executable);
        command
            .args(&self.args)
            .arg(&source_path)
            .current_dir(&job_dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            // own process group, so termination reaches grandchildren and
            // they cannot keep the output pipes open past the deadline
            use std::os::unix::process::CommandExt;
            unsafe {
                command.pre_exec(|| {
                    libc::setpgid(0, 0);
                    Ok(())
                });
            }
        }
        let mut child = command.spawn().map_err(|e| BackendError::Launch {
            command: self.executable.display().to_string(),
            detail: e.to_string(),
        })?;

        // drain pipes on side threads so a chatty checker cannot deadlock
        let stdout = child.stdout.take().expect("stdout piped");
        let stderr = child.stderr.take().expect("stderr piped");
        let stdout_thread = std::thread::spawn(move || drain(stdout));
        let stderr_thread = std::thread::spawn(move || drain(stderr));

        let deadline = started + job.timeout;
        let mut timed_out = false;
        let status = loop {
            match child.try_wait()? {
                Some(status) => break Some(status),
                None => {
                    if Instant::now() >= deadline {
                        timed_out = true;
                        break None;
                    }
                    std::thread::sleep(POLL_INTERVAL);
                }
            }
        };

        let status = match status {
            Some(s) => Some(s),
            None => {
                terminate(&mut child, self.kill_grace);
                None
            }
        };

        let _ = stdout_thread.join();
        let stderr_text = stderr_thread.join().unwrap_or_default();
        let elapsed = started.elapsed().as_millis() as u64;

        if timed_out {
            return Ok(Verdict::timeout(
                elapsed.max(job.timeout.as_millis() as u64),
            ));
        }
        let status = status.expect("either exited or timed out");
        // a process that finished only after the deadline is still a timeout
        if elapsed > job.timeout.as_millis() as u64 {
            return Ok(Verdict::timeout(elapsed));
        }
        if status.success() {
            return Ok(Verdict::pass(elapsed));
        }
        let mut diagnostics = parse_diagnostics(&stderr_text);
        if diagnostics.is_empty() {
            let raw = stderr_text.trim();
            let message = if raw.is_empty() {
                format!("checker exited with {status}")
            } else {
                raw.to_string()
            };
            diagnostics.push(Diagnostic::new(message, 0, 0));
        }
        Ok(Verdict::fail(diagnostics, elapsed))
    }
}

fn drain(mut reader: impl Read) -> String {
    let mut buf = String::new();
    let _ = reader.read_to_string(&mut buf);
    buf
}

/// Ask the child's process group to terminate, escalating to a forced kill
/// after the grace period.
fn terminate(child: &mut std::process::Child, grace: Duration) {
    #[cfg(unix)]
    {
        let group = -(child.id() as i32);
        unsafe {
            libc::kill(group, libc::SIGTERM);
        }
        let grace_deadline = Instant::now() + grace;
        while Instant::now() < grace_deadline {
            if let Ok(Some(_)) = child.try_wait() {
                unsafe {
                    libc::kill(group, libc::SIGKILL);
                }
                return;
            }
            std::thread::sleep(POLL_INTERVAL);
        }
        unsafe {
            libc::kill(group, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Parse `<file>:<line>:<col>: error: <msg>` lines from checker stderr.
pub fn parse_diagnostics(stderr: &str) -> Vec<Diagnostic> {
    stderr
        .lines()
        .filter_map(|line| {
            DIAGNOSTIC_RE.captures(line.trim()).map(|caps| Diagnostic {
                message: caps["msg"].to_string(),
                line: caps["line"].parse().unwrap_or(0),
                column: caps["col"].parse().unwrap_or(0),
            })
        })
        .collect()
}
