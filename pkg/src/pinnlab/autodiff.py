"""Nestable automatic differentiation.

Two cooperating pieces live here:

* :class:`Dual` -- a (primal, tangent) pair obeying eps**2 == 0 arithmetic.
  Components may be floats, numpy arrays, tape variables, or Duals, so duals
  nest (Dual of Dual gives second derivatives along one direction).
* :class:`Tape` / :class:`Var` -- an append-only record of elementary
  operations over numpy values, swept backwards for adjoints.

Every op rule is written against the generic functions in this module
(:func:`exp`, :func:`tanh`, ...), which is what lets a tape be replayed with
dual-valued inputs (forward-over-reverse second derivatives) and lets duals
carry tape variables (forward-over-forward derivatives inside a reverse pass,
which is how PDE residuals are differentiated with respect to parameters).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "StructureError",
    "Dual",
    "Var",
    "Tape",
    "Node",
    "Gradient",
    "Jet",
    "seed_jet",
    "exp",
    "log",
    "sin",
    "cos",
    "tanh",
    "softplus",
    "primal_value",
    "forward_eval",
    "reverse_gradient",
    "gradient",
    "second_derivative",
    "hessian",
]


class DomainError(ArithmeticError):
    """An elementary op was evaluated outside its domain."""

    def __init__(self, op, node=None, detail=""):
        self.op = op
        self.node = node
        self.detail = detail
        where = f" at node {node}" if node is not None else ""
        super().__init__(f"{op}{where}: {detail}")


class StructureError(ValueError):
    """Malformed graph, shape, or index."""


# ---------------------------------------------------------------------------
# small helpers shared by Dual, Var and the op rules


def _is_zero(x):
    return isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) and x == 0


def _is_one(x):
    return isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) and x == 1


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return -b
    return a - b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return a * b


def primal_value(x):
    """Strip duals and tape handles down to the underlying number or array."""
    while True:
        if isinstance(x, Dual):
            x = x.primal
        elif isinstance(x, Jet):
            x = x.v
        elif isinstance(x, Var):
            x = x.value
        else:
            return x


def _shape(x):
    return np.shape(primal_value(x))


def _ndim(x):
    return len(_shape(x))


def _T(x):
    if isinstance(x, (Dual, Var, Jet)):
        return x.T
    if np.ndim(x) >= 2:
        return np.swapaxes(x, -1, -2)
    return x


def _sum(x, axis=None, keepdims=False):
    if isinstance(x, (Dual, Var, Jet)):
        return x.sum(axis=axis, keepdims=keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def _reshape(x, shape):
    if isinstance(x, (Dual, Var, Jet)):
        return x.reshape(shape)
    return np.reshape(x, shape)


def _broadcast_to(x, shape):
    if isinstance(x, Dual):
        t = x.tangent
        if not _is_zero(t):
            t = _broadcast_to(t, shape)
        return Dual(_broadcast_to(x.primal, shape), t)
    return np.broadcast_to(x, shape)


def _sum_to(g, shape):
    """Undo numpy broadcasting: reduce ``g`` to ``shape``."""
    shape = tuple(shape)
    gshape = _shape(g)
    if gshape == shape:
        return g
    if len(gshape) < len(shape):
        return _broadcast_to(g, shape)
    lead = len(gshape) - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, s in enumerate(shape) if s == 1 and gshape[lead + i] != 1
    )
    return _reshape(_sum(g, axis=axes, keepdims=True), shape)


def _resolve_shape(shape, size):
    """Fill in a single -1 entry of a reshape target."""
    shape = tuple(int(s) for s in shape)
    if -1 in shape:
        known = int(np.prod([s for s in shape if s != -1]))
        shape = tuple(size // known if s == -1 else s for s in shape)
    return shape


def _check_div(den):
    if np.any(primal_value(den) == 0):
        raise DomainError("div", detail="division by zero")


def _check_log(x):
    v = primal_value(x)
    if np.any(v <= 0):
        bad = np.min(v)
        raise DomainError("ln", detail=f"non-positive argument {bad!r}")


def _np_softplus(x):
    # max(x,0) + ln(1+e^{-|x|}) never overflows
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


def _np_log(x):
    _check_log(x)
    return np.log(x)


def _generic(name, fallback):
    def f(x):
        if isinstance(x, (Dual, Var, Jet)):
            return getattr(x, name)()
        return fallback(x)

    f.__name__ = name
    f.__qualname__ = name
    f.__doc__ = f"Elementwise {name}; accepts numbers, arrays, duals and tape variables."
    return f


exp = _generic("exp", np.exp)
log = _generic("log", _np_log)
sin = _generic("sin", np.sin)
cos = _generic("cos", np.cos)
tanh = _generic("tanh", np.tanh)
softplus = _generic("softplus", _np_softplus)


# ---------------------------------------------------------------------------
# dual numbers


class Dual:
    """Dual number ``primal + tangent * eps`` with ``eps**2 == 0``.

    The tangent may carry extra *leading* axes relative to the primal; these
    index independent directions (e.g. one per network parameter) and ride
    along through broadcasting.  A plain zero tangent is kept as the scalar
    ``0.0`` so constants cost nothing.
    """

    __slots__ = ("primal", "tangent")
    __array_ufunc__ = None

    def __init__(self, primal, tangent=0.0):
        self.primal = primal
        self.tangent = tangent

    def __repr__(self):
        return f"Dual({self.primal!r}, {self.tangent!r})"

    def __float__(self):
        return float(primal_value(self))

    @property
    def shape(self):
        return _shape(self.primal)

    @property
    def ndim(self):
        return len(self.shape)

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.primal + other.primal, _add(self.tangent, other.tangent))
        return Dual(self.primal + other, self.tangent)

    def __radd__(self, other):
        return Dual(other + self.primal, self.tangent)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.primal - other.primal, _sub(self.tangent, other.tangent))
        return Dual(self.primal - other, self.tangent)

    def __rsub__(self, other):
        return Dual(other - self.primal, _sub(0.0, self.tangent))

    def __neg__(self):
        return Dual(-self.primal, _sub(0.0, self.tangent))

    def __mul__(self, other):
        if isinstance(other, Dual):
            p, q = self.primal, other.primal
            return Dual(p * q, _add(_mul(p, other.tangent), _mul(self.tangent, q)))
        return Dual(self.primal * other, _mul(self.tangent, other))

    def __rmul__(self, other):
        return Dual(other * self.primal, _mul(other, self.tangent))

    def __truediv__(self, other):
        if isinstance(other, Dual):
            _check_div(other.primal)
            v = self.primal / other.primal
            num = _sub(self.tangent, _mul(v, other.tangent))
            return Dual(v, 0.0 if _is_zero(num) else num / other.primal)
        _check_div(other)
        t = self.tangent
        return Dual(self.primal / other, 0.0 if _is_zero(t) else t / other)

    def __rtruediv__(self, other):
        _check_div(self.primal)
        v = other / self.primal
        t = self.tangent
        return Dual(v, 0.0 if _is_zero(t) else -(v * t) / self.primal)

    def __pow__(self, n):
        p, t = self.primal, self.tangent
        if isinstance(n, Dual):
            v = p**n.primal
            dt = _mul(_mul(n.primal, p ** (n.primal - 1)), t)
            if not _is_zero(n.tangent):
                dt = _add(dt, _mul(v * log(p), n.tangent))
            return Dual(v, dt)
        if _is_zero(t):
            return Dual(p**n, 0.0)
        return Dual(p**n, _mul(n * p ** (n - 1), t))

    def __rpow__(self, base):
        v = base**self.primal
        return Dual(v, _mul(v * log(base), self.tangent))

    def __matmul__(self, other):
        if isinstance(other, Dual):
            p, q = self.primal, other.primal
            t = 0.0
            if not _is_zero(other.tangent):
                t = p @ other.tangent
            if not _is_zero(self.tangent):
                t = _add(t, self.tangent @ q)
            return Dual(p @ q, t)
        t = self.tangent
        return Dual(self.primal @ other, 0.0 if _is_zero(t) else t @ other)

    def __rmatmul__(self, other):
        t = self.tangent
        return Dual(other @ self.primal, 0.0 if _is_zero(t) else other @ t)

    # elementary functions -------------------------------------------------
    def exp(self):
        e = exp(self.primal)
        return Dual(e, _mul(e, self.tangent))

    def log(self):
        _check_log(self.primal)
        t = self.tangent
        return Dual(log(self.primal), 0.0 if _is_zero(t) else t / self.primal)

    def sin(self):
        return Dual(sin(self.primal), _mul(cos(self.primal), self.tangent))

    def cos(self):
        return Dual(cos(self.primal), _mul(-sin(self.primal), self.tangent))

    def tanh(self):
        th = tanh(self.primal)
        if _is_zero(self.tangent):
            return Dual(th, 0.0)
        return Dual(th, (1.0 - th * th) * self.tangent)

    def softplus(self):
        s = softplus(self.primal)
        if _is_zero(self.tangent):
            return Dual(s, 0.0)
        # logistic(x) = exp(x - softplus(x)); exponent is never positive
        return Dual(s, exp(self.primal - s) * self.tangent)

    # structural ---------------------------------------------------------
    @property
    def T(self):
        return Dual(_T(self.primal), _T(self.tangent))

    def _lead(self):
        return _ndim(self.tangent) - self.ndim

    def sum(self, axis=None, keepdims=False):
        nd = self.ndim
        if axis is None:
            axes = tuple(range(-nd, 0))
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            axes = tuple(a - nd if a >= 0 else a for a in axes)
        p = _sum(self.primal, axis=axes, keepdims=keepdims)
        t = self.tangent
        if _is_zero(t):
            return Dual(p, 0.0)
        if _ndim(t) < nd:
            t = _broadcast_to(t, self.shape)
        return Dual(p, _sum(t, axis=axes, keepdims=keepdims))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        p = _reshape(self.primal, shape)
        t = self.tangent
        if not np.isscalar(t) and _ndim(t) > 0:
            lead = self._lead()
            if lead < 0:
                t = _broadcast_to(t, self.shape)
                lead = 0
            t = _reshape(t, _shape(t)[:lead] + _resolve_shape(shape, int(np.prod(self.shape))))
        return Dual(p, t)

    def __getitem__(self, idx):
        t = self.tangent
        if not np.isscalar(t) and _ndim(t) > 0:
            if self._lead() != 0:
                raise StructureError("cannot index a dual whose tangent has direction axes")
            t = t[idx]
        return Dual(self.primal[idx], t)


# ---------------------------------------------------------------------------
# second-order jets


class Jet:
    """Truncated Taylor expansion along K input directions at once.

    ``v`` is the value, ``d1[k]`` the first and ``d2[k]`` the second
    derivative along direction k (pure, not mixed, second derivatives).
    One jet pass replaces K nested-dual passes and shares the value stream,
    which is all a PDE residual with only unmixed second derivatives needs.
    Components may be arrays or tape variables.
    """

    __slots__ = ("v", "d1", "d2")
    __array_ufunc__ = None

    def __init__(self, v, d1, d2):
        self.v = v
        self.d1 = d1
        self.d2 = d2

    def __repr__(self):
        return f"Jet({self.v!r}, {self.d1!r}, {self.d2!r})"

    @property
    def shape(self):
        return _shape(self.v)

    @property
    def ndim(self):
        return len(self.shape)

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
        return Jet(self.v + o, self.d1, self.d2)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
        return Jet(self.v - o, self.d1, self.d2)

    def __rsub__(self, o):
        return Jet(o - self.v, -self.d1, -self.d2)

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __mul__(self, o):
        if isinstance(o, Jet):
            a, b = self, o
            d2 = a.d2 * b.v + 2.0 * (a.d1 * b.d1) + a.v * b.d2
            return Jet(a.v * b.v, a.d1 * b.v + a.v * b.d1, d2)
        return Jet(self.v * o, self.d1 * o, self.d2 * o)

    def __rmul__(self, o):
        return Jet(o * self.v, o * self.d1, o * self.d2)

    def _chain(self, f0, f1, f2):
        d1 = f1 * self.d1
        return Jet(f0, d1, f2 * (self.d1 * self.d1) + f1 * self.d2)

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o._reciprocal()
        _check_div(o)
        return self * (1.0 / o)

    def __rtruediv__(self, o):
        return o * self._reciprocal()

    def _reciprocal(self):
        _check_div(self.v)
        r = 1.0 / self.v
        r2 = r * r
        return self._chain(r, -r2, 2.0 * (r2 * r))

    def __pow__(self, n):
        if isinstance(n, (Jet, Dual, Var)):
            raise StructureError("jets support constant exponents only")
        v = self.v
        return self._chain(v**n, n * v ** (n - 1), (n * (n - 1)) * v ** (n - 2))

    def __matmul__(self, o):
        return Jet(self.v @ o, self.d1 @ o, self.d2 @ o)

    def __rmatmul__(self, o):
        return Jet(o @ self.v, o @ self.d1, o @ self.d2)

    def exp(self):
        e = exp(self.v)
        return self._chain(e, e, e)

    def log(self):
        _check_log(self.v)
        r = 1.0 / self.v
        return self._chain(log(self.v), r, -(r * r))

    def sin(self):
        s, c = sin(self.v), cos(self.v)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = sin(self.v), cos(self.v)
        return self._chain(c, -s, -c)

    def tanh(self):
        t = tanh(self.v)
        f1 = 1.0 - t * t
        return self._chain(t, f1, -2.0 * (t * f1))

    def softplus(self):
        s = softplus(self.v)
        sig = exp(self.v - s)
        return self._chain(s, sig, sig * (1.0 - sig))

    @property
    def T(self):
        return Jet(_T(self.v), _T(self.d1), _T(self.d2))

    def sum(self, axis=None, keepdims=False):
        nd = self.ndim
        if axis is None:
            axes = tuple(range(-nd, 0))
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            axes = tuple(a - nd if a >= 0 else a for a in axes)
        return Jet(
            _sum(self.v, axis=axes, keepdims=keepdims),
            _sum(self.d1, axis=axes, keepdims=keepdims),
            _sum(self.d2, axis=axes, keepdims=keepdims),
        )

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        shape = _resolve_shape(shape, int(np.prod(self.shape)))
        k = _shape(self.d1)[0]
        return Jet(_reshape(self.v, shape), _reshape(self.d1, (k,) + shape), _reshape(self.d2, (k,) + shape))


def seed_jet(cols, axes):
    """Input columns as jets seeded along the listed axes.

    Column ``axes[k]`` gets first derivative 1 in direction k; all second
    derivatives start at 0.
    """
    K = len(axes)
    out = []
    for i, c in enumerate(cols):
        c = np.asarray(c, dtype=float)
        d1 = np.zeros((K,) + c.shape)
        for k, a in enumerate(axes):
            if a == i:
                d1[k] = 1.0
        out.append(Jet(c, d1, np.zeros((K,) + c.shape)))
    return out


# ---------------------------------------------------------------------------
# reverse-mode tape


@dataclass
class Node:
    """One recorded elementary op."""

    op: str
    parents: tuple
    partials: tuple
    value: object
    attrs: object = None


def _r_add(v, attrs):
    a, b = v
    return a + b, (1.0, 1.0)


def _r_sub(v, attrs):
    a, b = v
    return a - b, (1.0, -1.0)


def _r_neg(v, attrs):
    return -v[0], (-1.0,)


def _r_mul(v, attrs):
    a, b = v
    return a * b, (b, a)


def _r_div(v, attrs):
    a, b = v
    _check_div(b)
    q = a / b
    inv = 1.0 / b
    return q, (inv, -(q * inv))


def _r_pow(v, attrs):
    if len(v) == 1:
        (a,), n = v, attrs
        return a**n, (n * a ** (n - 1),)
    a, b = v
    r = a**b
    return r, (b * a ** (b - 1), r * log(a))


def _r_exp(v, attrs):
    e = exp(v[0])
    return e, (e,)


def _r_log(v, attrs):
    a = v[0]
    _check_log(a)
    return log(a), (1.0 / a,)


def _r_sin(v, attrs):
    return sin(v[0]), (cos(v[0]),)


def _r_cos(v, attrs):
    return cos(v[0]), (-sin(v[0]),)


def _r_tanh(v, attrs):
    t = tanh(v[0])
    return t, (1.0 - t * t,)


def _r_softplus(v, attrs):
    s = softplus(v[0])
    return s, (exp(v[0] - s),)


def _r_matmul(v, attrs):
    a, b = v
    if _ndim(a) < 2 or _ndim(b) < 2:
        raise StructureError("tape matmul needs operands with at least two dimensions")
    return a @ b, (b, a)


def _r_sum(v, attrs):
    axis, keepdims = attrs
    return _sum(v[0], axis=axis, keepdims=keepdims), ()


def _r_transpose(v, attrs):
    return _T(v[0]), ()


_RULES = {
    "add": _r_add,
    "sub": _r_sub,
    "neg": _r_neg,
    "mul": _r_mul,
    "div": _r_div,
    "pow": _r_pow,
    "exp": _r_exp,
    "ln": _r_log,
    "sin": _r_sin,
    "cos": _r_cos,
    "tanh": _r_tanh,
    "softplus": _r_softplus,
    "matmul": _r_matmul,
    "sum": _r_sum,
    "transpose": _r_transpose,
}


def _vjp_elementwise(adj, node, k, nodes):
    d = node.partials[k]
    c = adj if _is_one(d) else (-adj if isinstance(d, float) and d == -1.0 else adj * d)
    return _sum_to(c, _shape(nodes[node.parents[k]].value))


def _vjp_matmul(adj, node, k, nodes):
    b, a = node.partials
    c = adj @ _T(b) if k == 0 else _T(a) @ adj
    return _sum_to(c, _shape(nodes[node.parents[k]].value))


def _vjp_sum(adj, node, k, nodes):
    axis, keepdims = node.attrs
    shape = _shape(nodes[node.parents[0]].value)
    if axis is not None and not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = sorted(a % len(shape) for a in axes)
        s = list(_shape(adj))
        for a in axes:
            s.insert(a, 1)
        adj = _reshape(adj, tuple(s))
    elif axis is None and not keepdims:
        adj = _reshape(adj, (1,) * len(shape))
    return _broadcast_to(adj, shape)


def _vjp_transpose(adj, node, k, nodes):
    return _T(adj)


_VJP = {"matmul": _vjp_matmul, "sum": _vjp_sum, "transpose": _vjp_transpose}


class Tape:
    """Append-only computational graph.

    Parents always precede children, so a single backward pass over node ids
    in decreasing order is a valid reverse topological order.
    """

    def __init__(self):
        self.nodes = []
        self.inputs = []

    def __len__(self):
        return len(self.nodes)

    def reset(self):
        self.nodes.clear()
        self.inputs.clear()

    def _push(self, node):
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def variable(self, value):
        """Register an input variable; its adjoint appears in gradients."""
        v = self._push(Node("input", (), (), value))
        self.inputs.append(v.id)
        return v

    def constant(self, value):
        return self._push(Node("const", (), (), value))

    def lift(self, x):
        if isinstance(x, Var):
            if x.tape is not self:
                raise StructureError("operands belong to different tapes")
            return x
        return self.constant(x)

    def apply(self, op, *parents, attrs=None):
        values = tuple(self.nodes[p.id].value for p in parents)
        try:
            value, partials = _RULES[op](values, attrs)
        except DomainError as err:
            raise DomainError(err.op, len(self.nodes), err.detail) from None
        return self._push(Node(op, tuple(p.id for p in parents), partials, value, attrs))

    def replay(self, input_values):
        """Re-run every op with new input values (e.g. duals).

        Returns a fresh node list; the tape itself is left untouched.
        """
        if len(input_values) != len(self.inputs):
            raise StructureError(
                f"expected {len(self.inputs)} input values, got {len(input_values)}"
            )
        fresh = dict(zip(self.inputs, input_values))
        out = []
        for i, node in enumerate(self.nodes):
            if node.op == "input":
                out.append(Node("input", (), (), fresh[i]))
            elif node.op == "const":
                out.append(node)
            else:
                values = tuple(out[p].value for p in node.parents)
                try:
                    value, partials = _RULES[node.op](values, node.attrs)
                except DomainError as err:
                    raise DomainError(err.op, i, err.detail) from None
                out.append(Node(node.op, node.parents, partials, value, node.attrs))
        return out


def _sweep(nodes, output, seed):
    adj = [None] * len(nodes)
    adj[output] = seed
    for i in range(output, -1, -1):
        a = adj[i]
        if a is None:
            continue
        node = nodes[i]
        if not node.parents:
            continue
        vjp = _VJP.get(node.op, _vjp_elementwise)
        for k, pid in enumerate(node.parents):
            c = vjp(a, node, k, nodes)
            adj[pid] = c if adj[pid] is None else adj[pid] + c
        adj[i] = None
    return adj


class Var:
    """Handle to a tape node.  Arithmetic on it records new nodes."""

    __slots__ = ("tape", "id")
    __array_ufunc__ = None

    def __init__(self, tape, id):
        self.tape = tape
        self.id = id

    def __repr__(self):
        return f"Var(id={self.id}, value={self.value!r})"

    @property
    def value(self):
        return self.tape.nodes[self.id].value

    @property
    def shape(self):
        return _shape(self.value)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def _bin(self, op, other, reverse=False):
        if isinstance(other, (Dual, Jet)):
            return NotImplemented
        other = self.tape.lift(other)
        if reverse:
            return self.tape.apply(op, other, self)
        return self.tape.apply(op, self, other)

    def __add__(self, o):
        return self._bin("add", o)

    def __radd__(self, o):
        return self._bin("add", o, True)

    def __sub__(self, o):
        return self._bin("sub", o)

    def __rsub__(self, o):
        return self._bin("sub", o, True)

    def __mul__(self, o):
        return self._bin("mul", o)

    def __rmul__(self, o):
        return self._bin("mul", o, True)

    def __truediv__(self, o):
        return self._bin("div", o)

    def __rtruediv__(self, o):
        return self._bin("div", o, True)

    def __matmul__(self, o):
        return self._bin("matmul", o)

    def __rmatmul__(self, o):
        return self._bin("matmul", o, True)

    def __neg__(self):
        return self.tape.apply("neg", self)

    def __pow__(self, n):
        if isinstance(n, (Dual, Jet)):
            return NotImplemented
        if isinstance(n, Var):
            return self.tape.apply("pow", self, self.tape.lift(n))
        return self.tape.apply("pow", self, attrs=n)

    def __rpow__(self, base):
        return self.tape.apply("pow", self.tape.lift(base), self)

    def exp(self):
        return self.tape.apply("exp", self)

    def log(self):
        return self.tape.apply("ln", self)

    def sin(self):
        return self.tape.apply("sin", self)

    def cos(self):
        return self.tape.apply("cos", self)

    def tanh(self):
        return self.tape.apply("tanh", self)

    def softplus(self):
        return self.tape.apply("softplus", self)

    @property
    def T(self):
        return self.tape.apply("transpose", self)

    def sum(self, axis=None, keepdims=False):
        if isinstance(axis, list):
            axis = tuple(axis)
        return self.tape.apply("sum", self, attrs=(axis, keepdims))

    def mean(self):
        return self.sum() * (1.0 / self.size)


@dataclass(frozen=True)
class Gradient:
    """Adjoints of a tape's registered inputs, in registration order."""

    adjoints: tuple

    def __len__(self):
        return len(self.adjoints)

    def __getitem__(self, i):
        return self.adjoints[i]

    def flat(self):
        return np.concatenate([np.ravel(a) for a in self.adjoints]) if self.adjoints else np.zeros(0)


# ---------------------------------------------------------------------------
# user-facing entry points


def forward_eval(expr, inputs, seed_index):
    """Value and directional derivative of ``expr`` in one forward pass.

    ``expr`` is any callable composed of the elementary ops; it receives one
    dual per input, with the ``seed_index`` input carrying tangent 1.
    """
    inputs = [float(x) for x in inputs]
    if not 0 <= seed_index < len(inputs):
        raise StructureError(f"seed_index {seed_index} out of range for {len(inputs)} inputs")
    xs = [Dual(x, 1.0 if i == seed_index else 0.0) for i, x in enumerate(inputs)]
    out = expr(*xs)
    if isinstance(out, Dual):
        return float(out.primal), float(out.tangent)
    return float(out), 0.0


def reverse_gradient(tape, output):
    """One reverse sweep from ``output`` back to every registered input.

    For a non-scalar output the seed is all ones, i.e. the gradient of the
    sum of its entries.
    """
    oid = output.id if isinstance(output, Var) else output
    if isinstance(output, Var) and output.tape is not tape:
        raise StructureError("output belongs to a different tape")
    if not isinstance(oid, (int, np.integer)) or not 0 <= oid < len(tape.nodes):
        raise StructureError(f"output id {output!r} is not a node of this tape")
    value = tape.nodes[oid].value
    seed = np.ones_like(value) if np.ndim(value) else 1.0
    adj = _sweep(tape.nodes, int(oid), seed)
    out = []
    for i in tape.inputs:
        a = adj[i]
        out.append(np.zeros_like(tape.nodes[i].value, dtype=float) if a is None else a)
    return Gradient(tuple(out))


def gradient(expr, inputs):
    """Reverse-mode gradient of a scalar ``expr`` at ``inputs``."""
    tape = Tape()
    xs = [tape.variable(float(x)) for x in inputs]
    out = expr(*xs)
    if not isinstance(out, Var):
        return np.zeros(len(xs))
    return np.array([float(a) for a in reverse_gradient(tape, out).adjoints])


def _hessian_columns(expr, inputs, columns):
    tape = Tape()
    xs = [tape.variable(float(x)) for x in inputs]
    out = expr(*xs)
    cols = {}
    for j in columns:
        if not isinstance(out, Var):
            cols[j] = np.zeros(len(xs))
            continue
        seeded = [Dual(float(x), 1.0 if k == j else 0.0) for k, x in enumerate(inputs)]
        nodes = tape.replay(seeded)
        adj = _sweep(nodes, out.id, Dual(1.0, 0.0))
        col = np.zeros(len(xs))
        for k, nid in enumerate(tape.inputs):
            a = adj[nid]
            if isinstance(a, Dual):
                col[k] = float(primal_value(a.tangent))
        cols[j] = col
    return cols


def second_derivative(expr, inputs, i, j):
    """d^2 expr / dx_i dx_j by forward-over-reverse.

    The expression is recorded once on a tape, then the tape is replayed with
    dual inputs seeded along x_j; the reverse sweep runs in dual arithmetic,
    and the tangent of input i's adjoint is the mixed partial.
    """
    n = len(inputs)
    if not (0 <= i < n and 0 <= j < n):
        raise StructureError(f"indices ({i}, {j}) out of range for {n} inputs")
    return float(_hessian_columns(expr, inputs, [j])[j][i])


def hessian(expr, inputs):
    """Full Hessian, one tape replay per column."""
    n = len(inputs)
    cols = _hessian_columns(expr, inputs, range(n))
    return np.column_stack([cols[j] for j in range(n)])
