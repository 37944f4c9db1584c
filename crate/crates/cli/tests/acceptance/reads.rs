use vfsafs::{mem_vfs, FaultInjector, Fd, Mode, Path, SeekWhence};

use crate::Verdict;

const PS: usize = 4;
const LIMIT: u64 = 20;

pub fn criterion_6() -> Verdict {
    let mut cases = 0;
    for size in 0..=16u64 {
        let content: Vec<u8> = (0..size).map(|i| 0xa0 + i as u8).collect();
        let mut vfs = mem_vfs(PS, FaultInjector::none());
        let f: Path = "/f".parse().unwrap();
        vfs.create(&f, vfsafs::Meta::new(0, 0, 0o644)).unwrap();
        let fd = vfs.open(&f, Mode::ReadWrite).unwrap();
        vfs.write(fd, &content).unwrap();
        for start in 0..=LIMIT {
            for len in 0..=(LIMIT - start) as usize {
                vfs.seek(fd, start as i64, SeekWhence::Set).unwrap();
                // poison bytes past `len` must stay untouched
                let mut buf = vec![0x55; len + 3];
                let n = match vfs.read(fd, &mut buf, len) {
                    Ok(n) => n,
                    Err(e) => {
                        return Verdict::Fail(format!("size {size} start {start} len {len}: {e}"))
                    }
                };
                let from = (start as usize).min(content.len());
                let to = (start as usize + len).min(content.len());
                let expected = &content[from..to];
                let pos = vfs.handles().get(fd).unwrap().pos;
                if &buf[..n] != expected
                    || buf[n..].iter().any(|&b| b != 0x55)
                    || pos != start + n as u64
                {
                    return Verdict::Fail(format!(
                        "size {size} start {start} len {len}: got {:02x?} pos {pos}, want {expected:02x?}",
                        &buf[..n]
                    ));
                }
                cases += 1;
            }
        }
        let _ = vfs.close(Fd(0));
    }
    Verdict::Pass(format!("{cases} (size, start, len) cases byte-exact"))
}
