"""t-out-of-n Shamir secret sharing, additive homomorphism, and packing.

Plain sharing puts the secret at x=0 with uniformly random higher
coefficients.  The packed variant embeds k secrets at the points 1..k of a
degree-(t+k-2) polynomial whose randomness is anchored by t-1 uniform
values, and evaluates at the fixed share points k+1..k+n.  Fixed
consecutive share points (rather than random ones) cost nothing in secrecy
and make homomorphic addition's point-matching precondition trivial.

Reconstruction needs t shares (plain) or t+k-1 shares (packed: t+k-1
points determine a degree-(t+k-2) polynomial).  Lagrange basis rows are
cached per point set because reconstruction dominates the share-based
aggregation protocol's cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

from .errors import (
    BadPacking,
    BadThreshold,
    DuplicatePoint,
    NotEnoughShares,
    PointMismatch,
)
from .field import DEFAULT_FIELD, FieldPrime


@dataclass(frozen=True)
class Share:
    """One polynomial evaluation (x, f(x)); x is never 0 or a packed
    secret embedding point."""

    x: int
    y: int

    def to_bytes(self) -> bytes:
        """Wire form: 8-byte x then 8-byte y, big-endian."""
        return self.x.to_bytes(8, "big") + self.y.to_bytes(8, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Share":
        if len(data) != 16:
            raise ValueError(f"share encoding is 16 bytes, got {len(data)}")
        return cls(x=int.from_bytes(data[:8], "big"),
                   y=int.from_bytes(data[8:], "big"))


@dataclass
class ShareSet:
    """Shares of one secret (k=1) or one packed block of k secrets."""

    shares: list[Share]
    t: int
    k: int = 1
    field: FieldPrime = DEFAULT_FIELD

    def xs(self) -> tuple[int, ...]:
        return tuple(s.x for s in self.shares)


@dataclass(frozen=True)
class PackingLayout:
    """Embedding points for packed sharing: secrets at 1..k, shares at
    k+1..k+n.  The two point sets must stay disjoint and nonzero."""

    secret_points: tuple[int, ...]
    share_points: tuple[int, ...]

    def __post_init__(self):
        overlap = set(self.secret_points) & set(self.share_points)
        if overlap:
            raise ValueError(f"secret/share points overlap: {sorted(overlap)}")
        if 0 in self.secret_points or 0 in self.share_points:
            raise ValueError("evaluation points must be nonzero")
        pts = self.secret_points + self.share_points
        if len(set(pts)) != len(pts):
            raise ValueError("evaluation points must be distinct")


def default_layout(k: int, n: int) -> PackingLayout:
    return PackingLayout(
        secret_points=tuple(range(1, k + 1)),
        share_points=tuple(range(k + 1, k + n + 1)),
    )


@lru_cache(maxsize=512)
def lagrange_basis(q: int, pts: tuple[int, ...], targets: tuple[int, ...]):
    """Rows of Lagrange basis coefficients: row r satisfies
    f(targets[r]) = sum_j row[j] * f(pts[j]) for any poly of degree < len(pts).

    Barycentric form: one O(len(pts)^2) weight pass, then O(len(pts)) per
    target.  Cached per point set; safe for concurrent readers.
    """
    ws = []
    for j, pj in enumerate(pts):
        d = 1
        for i, pi in enumerate(pts):
            if i != j:
                d = d * (pj - pi) % q
        ws.append(pow(d, q - 2, q))
    pt_index = {p: i for i, p in enumerate(pts)}
    rows = []
    for x in targets:
        if x in pt_index:
            rows.append(tuple(1 if i == pt_index[x] else 0 for i in range(len(pts))))
            continue
        diffs = [(x - p) % q for p in pts]
        full = 1
        for dx in diffs:
            full = full * dx % q
        rows.append(tuple(
            full * w % q * pow(dx, q - 2, q) % q for w, dx in zip(ws, diffs)
        ))
    return tuple(rows)


def _dot(row, vals, q: int) -> int:
    # big-int accumulate, single reduction
    return sum(c * v for c, v in zip(row, vals)) % q


def interpolate_at(points, x: int, field: FieldPrime = DEFAULT_FIELD) -> int:
    """Evaluate the interpolating polynomial through (x_i, y_i) at x."""
    xs = tuple(p[0] for p in points)
    if len(set(xs)) != len(xs):
        raise DuplicatePoint(f"repeated evaluation point in {xs}")
    row = lagrange_basis(field.q, xs, (x,))[0]
    return _dot(row, [p[1] for p in points], field.q)


# --- plain Shamir ------------------------------------------------------------


def sss_share(secret: int, t: int, n: int, rng,
              field: FieldPrime = DEFAULT_FIELD) -> ShareSet:
    """Split secret into n shares of a degree-(t-1) polynomial with
    f(0) = secret; coefficients drawn uniformly from rng."""
    if t < 1 or t > n:
        raise BadThreshold(f"need 0 < t <= n, got t={t}, n={n}")
    if n >= field.q:
        raise ValueError("more shares than nonzero field points")
    coeffs = [secret % field.q] + [field.rand(rng) for _ in range(t - 1)]
    shares = []
    for x in range(1, n + 1):
        y = 0
        for c in reversed(coeffs):
            y = (y * x + c) % field.q
        shares.append(Share(x, y))
    return ShareSet(shares, t=t, k=1, field=field)


def sss_reconstruct(share_set: ShareSet) -> int:
    """Lagrange-interpolate f(0) from any >= t plain shares."""
    if share_set.k != 1:
        raise ValueError("use packed_reconstruct for k > 1")
    if len(share_set.shares) < share_set.t:
        raise NotEnoughShares(
            f"{len(share_set.shares)} shares < threshold {share_set.t}")
    xs = share_set.xs()
    if len(set(xs)) != len(xs):
        raise DuplicatePoint("two shares carry the same x")
    q = share_set.field.q
    row = lagrange_basis(q, xs, (0,))[0]
    return _dot(row, [s.y for s in share_set.shares], q)


def share_add(a: ShareSet, b: ShareSet) -> ShareSet:
    """Pointwise share addition; reconstructing the result yields the sum
    of the underlying secrets."""
    if a.xs() != b.xs() or a.t != b.t or a.k != b.k or a.field.q != b.field.q:
        raise PointMismatch("share sets do not line up")
    q = a.field.q
    shares = [Share(sa.x, (sa.y + sb.y) % q)
              for sa, sb in zip(a.shares, b.shares)]
    return ShareSet(shares, t=a.t, k=a.k, field=a.field)


# --- packed Shamir ------------------------------------------------------------


def packed_share(secrets: list[int], t: int, n: int, rng,
                 field: FieldPrime = DEFAULT_FIELD,
                 layout: PackingLayout | None = None) -> ShareSet:
    """Embed k secrets in one polynomial; any t+k-1 shares reconstruct,
    any t-1 reveal nothing."""
    k = len(secrets)
    if t < 1:
        raise BadThreshold(f"threshold must be positive, got {t}")
    if n < t + k - 1:
        raise BadPacking(f"packing k={k} needs n >= t+k-1, got n={n}, t={t}")
    if layout is None:
        layout = default_layout(k, n)
    if len(layout.secret_points) != k or len(layout.share_points) < n:
        raise ValueError("layout inconsistent with k, n")
    q = field.q
    anchors = [field.rand(rng) for _ in range(t - 1)]
    anchor_pts = layout.share_points[: t - 1]
    interp_pts = layout.secret_points + anchor_pts
    vals = [s % q for s in secrets] + anchors
    rest_pts = layout.share_points[t - 1: n]
    rows = lagrange_basis(q, interp_pts, rest_pts)
    shares = [Share(x, y) for x, y in zip(anchor_pts, anchors)]
    shares += [Share(x, _dot(row, vals, q))
               for x, row in zip(rest_pts, rows)]
    return ShareSet(shares, t=t, k=k, field=field)


def packed_reconstruct(share_set: ShareSet,
                       layout: PackingLayout | None = None) -> list[int]:
    """Recover the k packed secrets from >= t+k-1 shares."""
    t, k = share_set.t, share_set.k
    need = t + k - 1
    if len(share_set.shares) < need:
        raise NotEnoughShares(
            f"{len(share_set.shares)} shares < t+k-1 = {need}")
    xs = share_set.xs()
    if len(set(xs)) != len(xs):
        raise DuplicatePoint("two shares carry the same x")
    secret_pts = (layout.secret_points if layout is not None
                  else tuple(range(1, k + 1)))
    picked = sorted(share_set.shares, key=lambda s: s.x)[:need]
    q = share_set.field.q
    rows = lagrange_basis(q, tuple(s.x for s in picked), secret_pts)
    ys = [s.y for s in picked]
    return [_dot(row, ys, q) for row in rows]


# --- packed sharing of whole vectors -----------------------------------------


@dataclass
class ShareVector:
    """One recipient's share of a whole vector: the evaluations at this
    recipient's point, one per k-wide chunk.  The final chunk is
    zero-padded; vec_len trims it on reconstruction."""

    x: int
    values: list[int]
    t: int
    k: int
    vec_len: int
    field: FieldPrime = dc_field(default=DEFAULT_FIELD, repr=False)

    @property
    def chunk_count(self) -> int:
        return len(self.values)


def share_vector(w: list[int], t: int, n: int, k: int, rng,
                 field: FieldPrime = DEFAULT_FIELD) -> list[ShareVector]:
    """Chunk w into ceil(m/k) packed blocks and share each; recipient j
    gets one field element per chunk, all at its own point k+1+j."""
    if t < 1 or t > n:
        raise BadThreshold(f"need 0 < t <= n, got t={t}, n={n}")
    if n < t + k - 1:
        raise BadPacking(f"packing k={k} needs n >= t+k-1, got n={n}, t={t}")
    q = field.q
    m = len(w)
    chunks = (m + k - 1) // k if m else 1
    layout = default_layout(k, n)
    anchor_pts = layout.share_points[: t - 1]
    interp_pts = layout.secret_points + anchor_pts
    rest_pts = layout.share_points[t - 1: n]
    rows = lagrange_basis(q, interp_pts, rest_pts)
    per_recipient = [[] for _ in range(n)]
    n_anchors = t - 1
    for c in range(chunks):
        block = [v % q for v in w[c * k: (c + 1) * k]]
        if len(block) < k:
            block += [0] * (k - len(block))
        vals = block + [field.rand(rng) for _ in range(n_anchors)]
        for j in range(n_anchors):
            per_recipient[j].append(vals[k + j])
        for j, row in enumerate(rows):
            per_recipient[n_anchors + j].append(_dot(row, vals, q))
    return [
        ShareVector(x=layout.share_points[j], values=per_recipient[j],
                    t=t, k=k, vec_len=m, field=field)
        for j in range(n)
    ]


def add_share_vectors(a: ShareVector, b: ShareVector) -> ShareVector:
    if (a.x != b.x or a.t != b.t or a.k != b.k or a.vec_len != b.vec_len
            or a.chunk_count != b.chunk_count or a.field.q != b.field.q):
        raise PointMismatch("share vectors do not line up")
    q = a.field.q
    return ShareVector(
        x=a.x, values=[(x + y) % q for x, y in zip(a.values, b.values)],
        t=a.t, k=a.k, vec_len=a.vec_len, field=a.field)


def reconstruct_vector(share_vectors: list[ShareVector]) -> list[int]:
    """Recover the original vector from >= t+k-1 per-recipient shares."""
    if not share_vectors:
        raise NotEnoughShares("no share vectors supplied")
    ref = share_vectors[0]
    t, k, q = ref.t, ref.k, ref.field.q
    need = t + k - 1
    if len(share_vectors) < need:
        raise NotEnoughShares(f"{len(share_vectors)} share vectors < {need}")
    xs = tuple(sv.x for sv in share_vectors)
    if len(set(xs)) != len(xs):
        raise DuplicatePoint("two share vectors carry the same x")
    for sv in share_vectors[1:]:
        if (sv.t != t or sv.k != k or sv.vec_len != ref.vec_len
                or sv.chunk_count != ref.chunk_count or sv.field.q != q):
            raise PointMismatch("share vectors disagree on shape")
    picked = sorted(share_vectors, key=lambda sv: sv.x)[:need]
    rows = lagrange_basis(q, tuple(sv.x for sv in picked),
                          tuple(range(1, k + 1)))
    out: list[int] = []
    for c in range(ref.chunk_count):
        ys = [sv.values[c] for sv in picked]
        out.extend(_dot(row, ys, q) for row in rows)
    return out[: ref.vec_len]


# --- chunked sharing of wide integers (keys, seeds) ---------------------------


def integer_chunks(value: int, total_bits: int, chunk_bits: int) -> list[int]:
    """Big-endian fixed-width decomposition; chunk count depends only on
    total_bits so every party agrees on the layout."""
    n_chunks = max(1, -(-total_bits // chunk_bits))
    mask = (1 << chunk_bits) - 1
    return [(value >> (chunk_bits * (n_chunks - 1 - i))) & mask
            for i in range(n_chunks)]


def chunks_to_integer(chunks: list[int], chunk_bits: int) -> int:
    value = 0
    for c in chunks:
        value = (value << chunk_bits) | c
    return value


def chunk_bits_for(field: FieldPrime) -> int:
    # each chunk must stay below q; 56 keeps chunks byte-aligned felicities
    return min(56, field.bit_width - 1)


def share_integer(value: int, total_bits: int, t: int, n: int, rng,
                  field: FieldPrime = DEFAULT_FIELD) -> list[tuple[int, tuple[int, ...]]]:
    """Shamir-share a wide integer chunk by chunk.

    Returns one (x, chunk_share_values) pair per recipient; all chunks of
    one recipient live at the same evaluation point x = recipient + 1.
    """
    bits = chunk_bits_for(field)
    sets = [sss_share(c, t, n, rng, field)
            for c in integer_chunks(value, total_bits, bits)]
    return [
        (x, tuple(s.shares[x - 1].y for s in sets))
        for x in range(1, n + 1)
    ]


def reconstruct_integer(shares: list[tuple[int, tuple[int, ...]]], t: int,
                        total_bits: int,
                        field: FieldPrime = DEFAULT_FIELD) -> int:
    """Inverse of share_integer given >= t distinct-point share tuples."""
    if len(shares) < t:
        raise NotEnoughShares(f"{len(shares)} shares < threshold {t}")
    xs = tuple(x for x, _ in shares)
    if len(set(xs)) != len(xs):
        raise DuplicatePoint("two integer shares carry the same x")
    bits = chunk_bits_for(field)
    n_chunks = max(1, -(-total_bits // bits))
    row = lagrange_basis(field.q, xs, (0,))[0]
    chunks = [
        _dot(row, [cs[i] for _, cs in shares], field.q)
        for i in range(n_chunks)
    ]
    return chunks_to_integer(chunks, bits)
