//! External compiler invocation with a content-addressed artifact cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SRC: &str = "{src}";
pub const OUT: &str = "{out}";
pub const ENV_COMMAND: &str = "FLARELITE_CC";

/// How to turn a C file into a loadable library (and, for the process
/// fallback, into an executable).
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolchainConfig {
    /// Shared-library command; `{src}` and `{out}` each appear once.
    pub command: String,
    /// Executable command for the process fallback.
    pub exe_command: String,
    pub work_dir: PathBuf,
    pub timeout_secs: u64,
    /// Where sources are written when compilation fails (defaults to
    /// `work_dir`). Every emitted source is also kept here when set.
    pub dump_dir: Option<PathBuf>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            command: "cc -O2 -shared -fPIC -ffp-contract=off {src} -o {out}".into(),
            exe_command: "cc -O2 -ffp-contract=off -DFLK_MAIN {src} -o {out}".into(),
            work_dir: std::env::temp_dir().join("flarelite-cache"),
            timeout_secs: 60,
            dump_dir: None,
        }
    }
}

impl ToolchainConfig {
    /// Defaults, with `FLARELITE_CC` replacing the library command.
    pub fn from_env() -> Result<Self> {
        let mut cfg = ToolchainConfig::default();
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ToolchainConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("toolchain config: {e}")))?;
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn apply_env(&mut self) {
        if let Ok(cmd) = std::env::var(ENV_COMMAND) {
            if !cmd.trim().is_empty() {
                self.command = cmd;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, cmd) in [("command", &self.command), ("exe_command", &self.exe_command)] {
            for p in [SRC, OUT] {
                let n = cmd.matches(p).count();
                if n != 1 {
                    return Err(Error::Config(format!(
                        "toolchain {what} must contain {p} exactly once, found {n}: {cmd:?}"
                    )));
                }
            }
            if split(cmd).is_empty() {
                return Err(Error::Config(format!("toolchain {what} is empty")));
            }
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config("toolchain timeout must be positive".into()));
        }
        Ok(())
    }
}

fn split(cmd: &str) -> Vec<&str> {
    cmd.split_whitespace().collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct CodegenTiming {
    pub emit_ms: f64,
    pub toolchain_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtifactKind {
    Library,
    Executable,
}

/// Compiles sources through the configured commands and caches the
/// results by SHA-256 of source plus command.
#[derive(Debug)]
pub struct Toolchain {
    cfg: ToolchainConfig,
    invocations: AtomicU64,
    built: Mutex<HashMap<String, Arc<Mutex<Option<PathBuf>>>>>,
}

impl Toolchain {
    pub fn new(cfg: ToolchainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Toolchain { cfg, invocations: AtomicU64::new(0), built: Mutex::new(HashMap::new()) })
    }

    pub fn config(&self) -> &ToolchainConfig {
        &self.cfg
    }

    /// How many times an external command has been started.
    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::SeqCst)
    }

    fn command(&self, kind: ArtifactKind) -> &str {
        match kind {
            ArtifactKind::Library => &self.cfg.command,
            ArtifactKind::Executable => &self.cfg.exe_command,
        }
    }

    pub fn cache_key(&self, src: &str, kind: ArtifactKind) -> String {
        let mut h = Sha256::new();
        h.update(src.as_bytes());
        h.update([0]);
        h.update(self.command(kind).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Path of a built artifact and the toolchain time spent (zero on a
    /// cache hit).
    pub fn build(&self, src: &str, kind: ArtifactKind) -> Result<(PathBuf, Duration)> {
        let key = self.cache_key(src, kind);
        // one lock per key, so distinct programs compile concurrently
        let cell = {
            let mut m = self.built.lock().unwrap_or_else(|e| e.into_inner());
            m.entry(key.clone()).or_default().clone()
        };
        let mut slot = cell.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = slot.as_ref() {
            if p.exists() {
                return Ok((p.clone(), Duration::ZERO));
            }
        }
        std::fs::create_dir_all(&self.cfg.work_dir)?;
        let ext = match kind {
            ArtifactKind::Library => std::env::consts::DLL_EXTENSION,
            ArtifactKind::Executable => "bin",
        };
        let out = self.cfg.work_dir.join(format!("flk-{key}.{ext}"));
        if let Some(dir) = &self.cfg.dump_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("flk-{key}.c")), src)?;
        }
        if out.exists() {
            *slot = Some(out.clone());
            return Ok((out, Duration::ZERO));
        }
        let start = Instant::now();
        let tmp_dir = tempfile::Builder::new().prefix("flk-build").tempdir_in(&self.cfg.work_dir)?;
        let src_path = tmp_dir.path().join("kernel.c");
        std::fs::write(&src_path, src)?;
        let tmp_out = tmp_dir.path().join(format!("kernel.{ext}"));
        self.run(self.command(kind), &src_path, &tmp_out, src, &key)?;
        // rename is atomic, so concurrent processes never see a partial file
        std::fs::rename(&tmp_out, &out)?;
        *slot = Some(out.clone());
        Ok((out, start.elapsed()))
    }

    fn run(&self, template: &str, src_path: &Path, out: &Path, src: &str, key: &str) -> Result<()> {
        let words: Vec<String> = split(template)
            .into_iter()
            .map(|w| w.replace(SRC, &src_path.to_string_lossy()).replace(OUT, &out.to_string_lossy()))
            .collect();
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let mut child = match Command::new(&words[0])
            .args(&words[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
        {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::ToolchainNotFound { command: words[0].clone() })
            }
            Err(e) => return Err(e.into()),
        };
        // drain pipes on helper threads so a chatty compiler cannot block
        let drain = |mut r: Box<dyn std::io::Read + Send>| {
            std::thread::spawn(move || {
                let mut s = String::new();
                let _ = r.read_to_string(&mut s);
                s
            })
        };
        let out_t = drain(Box::new(child.stdout.take().expect("piped")));
        let err_t = drain(Box::new(child.stderr.take().expect("piped")));
        let deadline = Instant::now() + Duration::from_secs(self.cfg.timeout_secs);
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::ToolchainTimeout(self.cfg.timeout_secs));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let stdout = out_t.join().unwrap_or_default();
        let stderr = err_t.join().unwrap_or_default();
        if status.success() && out.exists() {
            return Ok(());
        }
        let dir = self.cfg.dump_dir.clone().unwrap_or_else(|| self.cfg.work_dir.clone());
        std::fs::create_dir_all(&dir)?;
        let source_path = dir.join(format!("flk-{key}-failed.c"));
        std::fs::write(&source_path, src)?;
        let mut diagnostics = format!("`{}` exited with {status}\n", words.join(" "));
        diagnostics.push_str(&stderr);
        diagnostics.push_str(&stdout);
        Err(Error::CompileFailed { diagnostics, source_path })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_must_appear_once() {
        let mut cfg = ToolchainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.command = "cc {src} {src} -o {out}".into();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.command = "cc {src}".into();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_overrides_defaults() {
        let cfg = ToolchainConfig::from_toml_str("timeout_secs = 7\nwork_dir = \"/tmp/x\"\n").unwrap();
        assert_eq!(cfg.timeout_secs, 7);
        assert_eq!(cfg.work_dir, PathBuf::from("/tmp/x"));
        assert!(ToolchainConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn missing_compiler_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ToolchainConfig {
            command: "flarelite-no-such-cc {src} -o {out}".into(),
            work_dir: dir.path().into(),
            ..ToolchainConfig::default()
        };
        let tc = Toolchain::new(cfg).unwrap();
        match tc.build("int x;", ArtifactKind::Library) {
            Err(Error::ToolchainNotFound { command }) => {
                assert_eq!(command, "flarelite-no-such-cc")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failing_command_reports_diagnostics_and_dump() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ToolchainConfig {
            command: "sh -c false{src}{out}".into(),
            work_dir: dir.path().into(),
            ..ToolchainConfig::default()
        };
        let tc = Toolchain::new(cfg).unwrap();
        match tc.build("int x;", ArtifactKind::Library) {
            Err(Error::CompileFailed { source_path, .. }) => {
                assert_eq!(std::fs::read_to_string(source_path).unwrap(), "int x;")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slow_command_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ToolchainConfig {
            command: "sh {src} {out}".into(),
            work_dir: dir.path().into(),
            timeout_secs: 1,
            ..ToolchainConfig::default()
        };
        let tc = Toolchain::new(cfg).unwrap();
        assert!(matches!(tc.build("sleep 5", ArtifactKind::Library), Err(Error::ToolchainTimeout(1))));
    }
}
