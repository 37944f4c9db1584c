//! Serves a model instance as a real mounted filesystem through FUSE.
//!
//! All requests are handled on one session thread against a single shared
//! model, so they are applied one at a time in arrival order. Attribute and
//! entry caching are disabled and files are opened in direct I/O mode, so
//! every system call reaches the model.

mod bridge;
mod errno;
mod fs;

use std::io;
use std::path::PathBuf;
use std::sync::mpsc::Receiver;
use std::sync::{Arc, Mutex};

use fuser::{BackgroundSession, MountOption};
use vfsafs::{AfsState, FaultInjector, FaultPlan, MemAfs, Meta, Vfs};

pub use bridge::{Bridge, BridgeResult, Core, DirEntry, UserMapping};
pub use errno::{from_host, to_host};
pub use fs::ModelFs;

#[derive(Clone, Debug)]
pub struct MountConfig {
    pub mountpoint: PathBuf,
    pub page_size: usize,
    pub faults: FaultPlan,
    pub users: UserMapping,
    /// Owner, group and permissions of the root directory.
    pub root: Meta,
}

impl MountConfig {
    pub fn new(mountpoint: impl Into<PathBuf>) -> Self {
        MountConfig {
            mountpoint: mountpoint.into(),
            page_size: vfsafs::model::DEFAULT_PAGE_SIZE,
            faults: FaultPlan::None,
            users: UserMapping::Passthrough,
            root: Meta::new(0, 0, 0o755),
        }
    }

    fn core(&self) -> Core {
        let state = AfsState::new(self.page_size, self.root);
        let afs = MemAfs::with_faults(state, FaultInjector::new(self.faults.clone()));
        Arc::new(Mutex::new(Vfs::new(afs)))
    }

    fn options(&self) -> Vec<MountOption> {
        vec![
            MountOption::FSName("vfsafs".into()),
            MountOption::Subtype("vfsafs".into()),
            MountOption::AllowOther,
            MountOption::RW,
        ]
    }
}

/// A live mount. Dropping it unmounts.
pub struct Mounted {
    session: BackgroundSession,
    core: Core,
}

impl Mounted {
    /// The model behind the mount, for inspection while it is served.
    pub fn core(&self) -> &Core {
        &self.core
    }

    pub fn unmount(self) {
        self.session.join();
    }
}

/// Mounts on a background thread and returns once the mount is live.
pub fn mount(config: &MountConfig) -> io::Result<Mounted> {
    let core = config.core();
    let fs = ModelFs::new(
        Bridge::new(core.clone(), config.users.clone()),
        config.page_size as u32,
    );
    let session = fuser::spawn_mount2(fs, &config.mountpoint, &config.options())?;
    Ok(Mounted { session, core })
}

/// Mounts and serves until `stop` fires (or its sender is dropped), then
/// unmounts.
pub fn serve(config: &MountConfig, stop: Receiver<()>) -> io::Result<()> {
    let mounted = mount(config)?;
    let _ = stop.recv();
    mounted.unmount();
    Ok(())
}
