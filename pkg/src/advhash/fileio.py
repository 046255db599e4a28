"""Binary container formats and CSV emitters.

Model container "SGHM" (all integers little-endian):
    magic  4 bytes  b"SGHM"
    version u32     currently 1
    method  u8      0 = adversarial model, 1 = LSH, 2 = ITQ
    d, r, m, d_l    u32 each (m = d_l = 0 for LSH/ITQ)
    master_seed     u64
    ... matrices, row-major float64, in this fixed order:
    method 0: slopes (1 value: activation slope), encoder W (r x d),
              psi (d x m), disc enc_w (d_l x d), enc_b (d_l),
              dec_w (d x d_l), dec_b (d), then generator layers w, b
              (first w is m x r, later ones m x m; the layer count is
              inferred from the remaining file length)
    method 1: W (r x d)
    method 2: mean (d), pca_w (r x d), rotation (r x r)

Packed-code container "SGHC":
    magic b"SGHC", version u32, count u32, bits u32, then the code words
    (count * ceil(bits/64) of them) as little-endian u64.

Ground-truth file: per query a u32 count N followed by N u32 indices.
"""

import numpy as np

from .baselines import ItqModel
from .errors import FormatError
from .model import (
    AdvHashModel,
    EnergyDiscriminator,
    HashEncoder,
    MeasurementMatrix,
    SparseGenerator,
)
from .search import PackedCodeSet, words_needed

MODEL_MAGIC = b"SGHM"
CODES_MAGIC = b"SGHC"
FORMAT_VERSION = 1
METHOD_IDS = {"adv": 0, "lsh": 1, "itq": 2}
METHOD_NAMES = {v: k for k, v in METHOD_IDS.items()}


def _f64_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, path: str):
        with open(path, "rb") as fh:
            self.buf = fh.read()
        self.path = path
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated while reading {what} "
                              f"at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return int(np.frombuffer(self.take(4, what), dtype="<u4")[0])

    def u64(self, what: str) -> int:
        return int(np.frombuffer(self.take(8, what), dtype="<u8")[0])

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def f64_array(self, shape, what: str) -> np.ndarray:
        count = int(np.prod(shape))
        data = np.frombuffer(self.take(count * 8, what), dtype="<f8")
        return data.reshape(shape).copy()

    def remaining(self) -> int:
        return len(self.buf) - self.pos


def save_model(path: str, obj, master_seed: int = None) -> None:
    """Serialize an AdvHashModel, LSH HashEncoder, or ItqModel."""
    if isinstance(obj, AdvHashModel):
        method = METHOD_IDS["adv"]
        d, r = obj.input_dim, obj.bits
        m, d_l = obj.sparse_dim, obj.discriminator.hidden_dim
        if master_seed is None and obj.config is not None:
            master_seed = obj.config.master_seed
    elif isinstance(obj, HashEncoder):
        method = METHOD_IDS["lsh"]
        r, d = obj.w.shape
        m = d_l = 0
    elif isinstance(obj, ItqModel):
        method = METHOD_IDS["itq"]
        r, d = obj.pca_w.shape
        m = d_l = 0
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if master_seed is None:
        master_seed = 0

    parts = [MODEL_MAGIC,
             np.array([FORMAT_VERSION], dtype="<u4").tobytes(),
             bytes([method]),
             np.array([d, r, m, d_l], dtype="<u4").tobytes(),
             np.array([master_seed], dtype="<u8").tobytes()]
    if method == METHOD_IDS["adv"]:
        parts.append(_f64_bytes([obj.generator.leaky_slope]))
        parts.append(_f64_bytes(obj.encoder.w))
        parts.append(_f64_bytes(obj.measurement.psi))
        disc = obj.discriminator
        parts += [_f64_bytes(disc.enc_w), _f64_bytes(disc.enc_b),
                  _f64_bytes(disc.dec_w), _f64_bytes(disc.dec_b)]
        for w, b in zip(obj.generator.weights, obj.generator.biases):
            parts += [_f64_bytes(w), _f64_bytes(b)]
    elif method == METHOD_IDS["lsh"]:
        parts.append(_f64_bytes(obj.w))
    else:
        parts += [_f64_bytes(obj.mean), _f64_bytes(obj.pca_w), _f64_bytes(obj.rotation)]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_model(path: str):
    """Returns (method_name, model, master_seed)."""
    rd = _Reader(path)
    if rd.take(4, "magic") != MODEL_MAGIC:
        raise FormatError(f"{path}: not an SGHM model file")
    version = rd.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    method = rd.u8("method id")
    if method not in METHOD_NAMES:
        raise FormatError(f"{path}: unknown method id {method}")
    dims = np.frombuffer(rd.take(16, "dims"), dtype="<u4")
    d, r, m, d_l = (int(v) for v in dims)
    master_seed = rd.u64("master seed")

    if method == METHOD_IDS["adv"]:
        slope = float(rd.f64_array((1,), "slopes")[0])
        enc_w = rd.f64_array((r, d), "encoder W")
        psi = rd.f64_array((d, m), "psi")
        disc = EnergyDiscriminator(
            enc_w=rd.f64_array((d_l, d), "disc enc_w"),
            enc_b=rd.f64_array((d_l,), "disc enc_b"),
            dec_w=rd.f64_array((d, d_l), "disc dec_w"),
            dec_b=rd.f64_array((d,), "disc dec_b"),
            leaky_slope=slope,
        )
        weights, biases = [], []
        fan_in = r
        while rd.remaining() > 0:
            weights.append(rd.f64_array((m, fan_in), "generator weight"))
            biases.append(rd.f64_array((m,), "generator bias"))
            fan_in = m
        if not weights:
            raise FormatError(f"{path}: model has no generator layers")
        model = AdvHashModel(
            encoder=HashEncoder(enc_w),
            generator=SparseGenerator(weights, biases, slope),
            measurement=MeasurementMatrix(psi),
            discriminator=disc,
        )
    elif method == METHOD_IDS["lsh"]:
        model = HashEncoder(rd.f64_array((r, d), "W"))
    else:
        model = ItqModel(mean=rd.f64_array((d,), "mean"),
                         pca_w=rd.f64_array((r, d), "pca_w"),
                         rotation=rd.f64_array((r, r), "rotation"))
    if rd.remaining():
        raise FormatError(f"{path}: {rd.remaining()} unexpected trailing bytes")
    return METHOD_NAMES[method], model, master_seed


def save_codes(path: str, codes: PackedCodeSet) -> None:
    with open(path, "wb") as fh:
        fh.write(CODES_MAGIC)
        fh.write(np.array([FORMAT_VERSION, codes.count, codes.bits], dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(codes.data, dtype="<u8").tobytes())


def load_codes(path: str) -> PackedCodeSet:
    rd = _Reader(path)
    if rd.take(4, "magic") != CODES_MAGIC:
        raise FormatError(f"{path}: not an SGHC code file")
    version = rd.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    count = rd.u32("count")
    bits = rd.u32("bits")
    words = words_needed(bits)
    raw = rd.take(count * words * 8, "code words")
    if rd.remaining():
        raise FormatError(f"{path}: {rd.remaining()} unexpected trailing bytes")
    data = np.frombuffer(raw, dtype="<u8").reshape(count, words).copy()
    return PackedCodeSet(count=count, bits=bits, data=data)


def save_ground_truth(path: str, gt: np.ndarray) -> None:
    gt = np.asarray(gt, dtype="<u4")
    n_queries, n = gt.shape
    rec = np.empty((n_queries, n + 1), dtype="<u4")
    rec[:, 0] = n
    rec[:, 1:] = gt
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


def load_ground_truth(path: str) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size < 4:
        raise FormatError(f"{path}: too short for a ground-truth file")
    n = int(raw[:4].view("<u4")[0])
    rec_size = 4 * (n + 1)
    if n <= 0 or raw.size % rec_size != 0:
        raise FormatError(f"{path}: malformed ground-truth record structure")
    table = raw.reshape(-1, rec_size)
    counts = table[:, :4].copy().view("<u4").ravel()
    if not np.all(counts == n):
        raise FormatError(f"{path}: inconsistent neighbor counts")
    return table[:, 4:].copy().view("<u4").reshape(-1, n).astype(np.int64)


# ---------------------------------------------------------------------------
# text formats
# ---------------------------------------------------------------------------

HISTORY_HEADER = "epoch,gen_loss,disc_loss,recon_mse,mean_abs_code,real_energy,synth_energy"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_history_csv(path: str, history) -> None:
    lines = [HISTORY_HEADER]
    for e in range(len(history)):
        lines.append(",".join([str(e)] + [_fmt(col[e]) for col in (
            history.gen_loss, history.disc_loss, history.recon_mse,
            history.mean_abs_code, history.real_energy, history.synth_energy)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_csv(path: str, report) -> None:
    """One summary row, then a long-format recall-curve table."""
    ks = sorted(report.precision_at)
    header = "map," + ",".join(f"pre@{k}" for k in ks) + ",recon_mse,spearman"
    summary = ",".join([_fmt(report.map)]
                       + [_fmt(report.precision_at[k]) for k in ks]
                       + [_fmt(report.recon_mse), _fmt(report.distance_spearman)])
    lines = [header, summary, "curve_name,T,recall"]
    for name in sorted(report.recall_curves, key=lambda s: int(s.split("-")[1])):
        for t, rec in report.recall_curves[name]:
            lines.append(f"{name},{t},{_fmt(rec)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ranking_csv(path: str, rankings, distances=None) -> None:
    lines = ["query,rank,db_index" + (",hamming" if distances is not None else "")]
    for q, ranking in enumerate(rankings):
        for pos, idx in enumerate(ranking):
            row = f"{q},{pos + 1},{idx}"
            if distances is not None:
                row += f",{distances[q][pos]}"
            lines.append(row)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_pgm(path: str, image: np.ndarray) -> None:
    """8-bit binary portable graymap from values in [0, 1]."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    h, w = img.shape
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# config files: one `key = value` per line, `#` comments
# ---------------------------------------------------------------------------

def parse_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise FormatError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
            key, value = (part.strip() for part in stripped.split("=", 1))
            values[key] = value
    return values


def coerce_config_values(raw: dict):
    """Map string values from a config file onto TrainConfig field types."""
    from .training import CONFIG_FIELDS, TrainConfig

    defaults = TrainConfig()
    out = {}
    for key, text in raw.items():
        if key not in CONFIG_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        if text.lower() in ("none", "auto"):
            out[key] = None
            continue
        ref = getattr(defaults, key)
        if isinstance(ref, bool):
            out[key] = text.lower() in ("1", "true", "yes", "on")
        elif isinstance(ref, int) and not isinstance(ref, bool):
            out[key] = int(text)
        elif isinstance(ref, float):
            out[key] = float(text)
        elif key in ("sigma", "m"):
            out[key] = float(text) if key == "sigma" else int(text)
        else:
            out[key] = text
    return out
