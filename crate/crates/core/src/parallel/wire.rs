//! Length-prefixed binary framing of [`WorkerMessage`] for workers that live
//! in other processes: a 4-byte big-endian payload length, then the payload.
//! Integers are a sign byte plus length-prefixed big-endian magnitude.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Duration;

use num_bigint::{BigInt, BigUint, Sign};
use thiserror::Error;

use super::{Ladder, MultiplierTask, Segment, StopReason, Task, TrackedForm, WorkerMessage, WorkerStats};
use crate::qforms::{Discriminant, QuadForm};
use crate::report::{FactorReport, Method};
use crate::squfof::BookkeepingSample;

/// Frames larger than this are rejected on decode.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("truncated frame")]
    Truncated,
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("unknown tag {0}")]
    UnknownTag(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }
    fn int(&mut self, v: &BigInt) {
        let (sign, mag) = v.to_bytes_be();
        self.u8(match sign {
            Sign::Minus => 2,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        });
        self.bytes(&mag);
    }
    fn nat(&mut self, v: &BigUint) {
        self.bytes(&v.to_bytes_be());
    }
    fn form(&mut self, f: &TrackedForm) {
        self.int(&f.form.a);
        self.int(&f.form.b);
        self.int(&f.form.c);
        self.f64(f.dist);
    }
    fn stats(&mut self, s: &WorkerStats) {
        self.u64(s.steps);
        self.u64(s.squares_tested);
        self.u64(s.reverse_steps);
        self.u32(s.bookkeeping.len() as u32);
        for b in &s.bookkeeping {
            self.u64(b.index);
            self.f64(b.predicted);
            self.f64(b.observed);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
    fn str(&mut self) -> Result<String, WireError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|e| WireError::Malformed(e.to_string()))
    }
    fn int(&mut self) -> Result<BigInt, WireError> {
        let sign = match self.u8()? {
            0 => Sign::NoSign,
            1 => Sign::Plus,
            2 => Sign::Minus,
            t => return Err(WireError::Malformed(format!("sign byte {t}"))),
        };
        let mag = BigUint::from_bytes_be(self.bytes()?);
        Ok(BigInt::from_biguint(if mag == BigUint::default() { Sign::NoSign } else { sign }, mag))
    }
    fn nat(&mut self) -> Result<BigUint, WireError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }
    fn form(&mut self, disc: &Arc<Discriminant>) -> Result<TrackedForm, WireError> {
        let (a, b) = (self.int()?, self.int()?);
        let c = self.int()?;
        let form = QuadForm::with_disc(a, b, disc).map_err(|e| WireError::Malformed(e.to_string()))?;
        if form.c != c {
            return Err(WireError::Malformed("form coefficient c disagrees with discriminant".into()));
        }
        Ok(TrackedForm { form, dist: self.f64()? })
    }
    fn stats(&mut self) -> Result<WorkerStats, WireError> {
        let (steps, squares_tested, reverse_steps) = (self.u64()?, self.u64()?, self.u64()?);
        let k = self.u32()? as usize;
        let mut bookkeeping = Vec::with_capacity(k.min(1 << 16));
        for _ in 0..k {
            bookkeeping.push(BookkeepingSample { index: self.u64()?, predicted: self.f64()?, observed: self.f64()? });
        }
        Ok(WorkerStats { steps, squares_tested, reverse_steps, bookkeeping })
    }
}

const METHODS: [Method; 5] = [Method::Trivial, Method::Squfof, Method::Bsgs, Method::Parallel, Method::Symmetry];

fn write_report(w: &mut Writer, r: &FactorReport) {
    w.nat(&r.n);
    w.nat(&r.factors.0);
    w.nat(&r.factors.1);
    w.u8(METHODS.iter().position(|m| *m == r.method).expect("listed") as u8);
    for v in [r.forward_steps, r.reverse_steps, r.squares_tested, r.giant_steps, r.multiplier] {
        w.u64(v);
    }
    w.u64(r.wall_time.as_nanos() as u64);
}

fn read_report(r: &mut Reader) -> Result<FactorReport, WireError> {
    let n = r.nat()?;
    let factors = (r.nat()?, r.nat()?);
    let method = *METHODS.get(r.u8()? as usize).ok_or_else(|| WireError::Malformed("method".into()))?;
    Ok(FactorReport {
        n,
        factors,
        method,
        forward_steps: r.u64()?,
        reverse_steps: r.u64()?,
        squares_tested: r.u64()?,
        giant_steps: r.u64()?,
        multiplier: r.u64()?,
        wall_time: Duration::from_nanos(r.u64()?),
    })
}

fn write_segment(w: &mut Writer, s: &Segment) {
    w.u64(s.job);
    w.u64(s.seq);
    let l = &s.ladder;
    w.nat(&l.n);
    w.u64(l.multiplier);
    w.form(&l.origin);
    w.u32(l.forms.len() as u32);
    for f in &l.forms {
        w.form(f);
    }
    w.form(&s.start);
    w.form(&s.end);
    w.form(&s.root_s);
}

fn read_segment(r: &mut Reader) -> Result<Segment, WireError> {
    let (job, seq) = (r.u64()?, r.u64()?);
    let n = r.nat()?;
    let multiplier = r.u64()?;
    let d = BigInt::from(&n * multiplier) * 4;
    let disc = Discriminant::new(d).map_err(|e| WireError::Malformed(e.to_string()))?;
    let origin = r.form(&disc)?;
    let k = r.u32()? as usize;
    if k == 0 || k > 64 {
        return Err(WireError::Malformed(format!("ladder length {k}")));
    }
    let forms = (0..k).map(|_| r.form(&disc)).collect::<Result<Vec<_>, _>>()?;
    let ladder = Arc::new(Ladder { n, multiplier, origin, forms });
    Ok(Segment { job, seq, start: r.form(&disc)?, end: r.form(&disc)?, root_s: r.form(&disc)?, ladder })
}

/// Serializes one message to a complete frame.
pub fn encode_frame(msg: &WorkerMessage) -> Vec<u8> {
    let mut w = Writer(vec![0; 4]);
    match msg {
        WorkerMessage::Assign(Task::Segment(s)) => {
            w.u8(1);
            write_segment(&mut w, s);
        }
        WorkerMessage::Assign(Task::Multiplier(m)) => {
            w.u8(2);
            w.u64(m.job);
            w.u64(m.seq);
            w.nat(&m.n);
            w.u64(m.multiplier);
            w.u64(m.max_forward_steps.map_or(0, |v| v + 1));
        }
        WorkerMessage::FactorFound { worker, job, seq, report, stats } => {
            w.u8(3);
            w.u32(*worker);
            w.u64(*job);
            w.u64(*seq);
            write_report(&mut w, report);
            w.stats(stats);
        }
        WorkerMessage::SegmentExhausted { worker, job, seq, reason, stats } => {
            w.u8(4);
            w.u32(*worker);
            w.u64(*job);
            w.u64(*seq);
            w.u8(match reason {
                StopReason::Exhausted => 0,
                StopReason::Cancelled => 1,
                StopReason::Wrapped => 2,
            });
            w.stats(stats);
        }
        WorkerMessage::ProtocolError { worker, job, seq, reason } => {
            w.u8(5);
            w.u32(*worker);
            w.u64(*job);
            w.u64(*seq);
            w.str(reason);
        }
        WorkerMessage::Shutdown { job } => {
            w.u8(6);
            w.u64(job.map_or(0, |j| j + 1));
        }
    }
    let len = (w.0.len() - 4) as u32;
    w.0[..4].copy_from_slice(&len.to_be_bytes());
    w.0
}

fn decode_payload(p: &[u8]) -> Result<WorkerMessage, WireError> {
    let mut r = Reader { buf: p, pos: 0 };
    let msg = match r.u8()? {
        1 => WorkerMessage::Assign(Task::Segment(read_segment(&mut r)?)),
        2 => {
            let (job, seq, n, multiplier) = (r.u64()?, r.u64()?, r.nat()?, r.u64()?);
            let max = r.u64()?;
            WorkerMessage::Assign(Task::Multiplier(MultiplierTask { job, seq, n, multiplier, max_forward_steps: max.checked_sub(1) }))
        }
        3 => {
            let (worker, job, seq) = (r.u32()?, r.u64()?, r.u64()?);
            let report = read_report(&mut r)?;
            WorkerMessage::FactorFound { worker, job, seq, report, stats: r.stats()? }
        }
        4 => {
            let (worker, job, seq) = (r.u32()?, r.u64()?, r.u64()?);
            let reason = match r.u8()? {
                0 => StopReason::Exhausted,
                1 => StopReason::Cancelled,
                2 => StopReason::Wrapped,
                _ => return Err(WireError::Malformed("stop reason".into())),
            };
            WorkerMessage::SegmentExhausted { worker, job, seq, reason, stats: r.stats()? }
        }
        5 => {
            let (worker, job, seq) = (r.u32()?, r.u64()?, r.u64()?);
            WorkerMessage::ProtocolError { worker, job, seq, reason: r.str()? }
        }
        6 => WorkerMessage::Shutdown { job: r.u64()?.checked_sub(1) },
        t => return Err(WireError::UnknownTag(t)),
    };
    if r.pos != p.len() {
        return Err(WireError::Malformed(format!("{} trailing bytes", p.len() - r.pos)));
    }
    Ok(msg)
}

/// Decodes one frame from the front of `buf`; returns the message and the bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(WorkerMessage, usize), WireError> {
    let head = buf.get(..4).ok_or(WireError::Truncated)?;
    let len = u32::from_be_bytes(head.try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME {
        return Err(WireError::TooLarge(len));
    }
    let payload = buf.get(4..4 + len).ok_or(WireError::Truncated)?;
    Ok((decode_payload(payload)?, 4 + len))
}

pub fn write_frame<W: Write>(w: &mut W, msg: &WorkerMessage) -> Result<(), WireError> {
    w.write_all(&encode_frame(msg))?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<WorkerMessage, WireError> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let len = u32::from_be_bytes(head) as usize;
    if len > MAX_FRAME {
        return Err(WireError::TooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    decode_payload(&payload)
}

#[cfg(test)]
mod tests {
    use super::super::{prepare_ladder, SegmentMinter};
    use super::*;

    fn messages() -> Vec<WorkerMessage> {
        let n = BigUint::from(1_000_003u64 * 999_983);
        let ladder = Arc::new(prepare_ladder(&n, 3, 5, 1).unwrap());
        let mut m = SegmentMinter::new(7, ladder).unwrap();
        m.next_segment().unwrap();
        let seg = m.next_segment().unwrap();
        let mut report = FactorReport::from_divisor(&n, &BigUint::from(999_983u32), Method::Parallel).unwrap();
        report.forward_steps = 1234;
        report.wall_time = Duration::from_micros(4321);
        let stats = WorkerStats {
            steps: 99,
            squares_tested: 3,
            reverse_steps: 17,
            bookkeeping: vec![BookkeepingSample { index: 4, predicted: -1.5, observed: f64::NAN }],
        };
        vec![
            WorkerMessage::Assign(Task::Segment(seg)),
            WorkerMessage::Assign(Task::Multiplier(MultiplierTask { job: 1, seq: 2, n: n.clone(), multiplier: 11, max_forward_steps: Some(0) })),
            WorkerMessage::Assign(Task::Multiplier(MultiplierTask { job: 1, seq: 3, n, multiplier: 13, max_forward_steps: None })),
            WorkerMessage::FactorFound { worker: 2, job: 7, seq: 9, report, stats: stats.clone() },
            WorkerMessage::SegmentExhausted { worker: 0, job: 7, seq: 1, reason: StopReason::Cancelled, stats: WorkerStats::default() },
            WorkerMessage::SegmentExhausted { worker: 3, job: 7, seq: 2, reason: StopReason::Wrapped, stats: WorkerStats::default() },
            WorkerMessage::ProtocolError { worker: 1, job: 0, seq: 0, reason: "boom".into() },
            WorkerMessage::Shutdown { job: None },
            WorkerMessage::Shutdown { job: Some(0) },
        ]
    }

    fn same(a: &WorkerMessage, b: &WorkerMessage) -> bool {
        // NaN distances defeat PartialEq; compare frames instead
        encode_frame(a) == encode_frame(b)
    }

    #[test]
    fn round_trip_every_kind() {
        for m in messages() {
            let f = encode_frame(&m);
            assert_eq!(u32::from_be_bytes(f[..4].try_into().unwrap()) as usize, f.len() - 4);
            let (back, used) = decode_frame(&f).unwrap();
            assert_eq!(used, f.len());
            assert!(same(&m, &back), "{m:?}");
        }
    }

    #[test]
    fn stream_of_frames() {
        let mut buf = Vec::new();
        for m in messages() {
            write_frame(&mut buf, &m).unwrap();
        }
        let mut cur = std::io::Cursor::new(buf);
        for m in messages() {
            assert!(same(&m, &read_frame(&mut cur).unwrap()));
        }
        assert!(read_frame(&mut cur).is_err());
    }

    #[test]
    fn rejects_damage() {
        let f = encode_frame(&messages()[0]);
        for cut in [0, 3, 4, f.len() / 2, f.len() - 1] {
            assert!(decode_frame(&f[..cut]).is_err());
        }
        let mut bad = f.clone();
        bad[4] = 200;
        assert!(matches!(decode_frame(&bad), Err(WireError::UnknownTag(200))));
        let mut huge = f;
        huge[..4].copy_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(decode_frame(&huge), Err(WireError::TooLarge(_))));
    }
}
