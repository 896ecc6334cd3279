"""
Reverse-mode automatic differentiation with second-order Taylor jets.

Two pieces compose:

* :class:`Tape` / :class:`Node` record a computation (values may be numpy
  arrays, scalars are 0-d arrays) and accumulate adjoints in reverse index
  order.  Nodes are appended as they are created, so the index order is a
  topological order and the graph is acyclic by construction.
* :class:`Jet` carries ``(u, u', u'')`` of a quantity with respect to one
  scalar input.  Its components may be plain numbers / arrays or taped nodes,
  so the same Taylor arithmetic yields input derivatives numerically and,
  when the network weights are taped, exact parameter gradients of losses
  built from those derivatives.

Supported primitives: ``+ - * /``, integer powers, ``exp``, ``log``, ``tanh``,
``sigmoid``, ``sqrt``, ``sin``, ``cos``, ``@``, ``sum``, ``mean`` and indexing.
Non-smooth primitives such as ``abs`` are not provided.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..utils.validation import AutodiffError, ValidationError

Number = Union[float, int, np.ndarray]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    grad = np.asarray(grad, dtype=float)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Node:
    """One recorded value on a tape."""

    __slots__ = ("tape", "index", "value", "op", "parents", "partials")

    # Make numpy defer to Node's reflected operators (ndarray * Node -> Node).
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", index: int, value: np.ndarray, op: str,
                 parents: Tuple[int, ...], partials: Tuple[Callable, ...]):
        self.tape = tape
        self.index = index
        self.value = value
        self.op = op
        self.parents = parents
        self.partials = partials

    def __repr__(self) -> str:
        return f"Node(#{self.index} {self.op} shape={self.value.shape})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def describe(self) -> str:
        return f"node #{self.index} ({self.op}, parents {list(self.parents)})"

    # Arithmetic -------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return add(self, other)

    def __radd__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return add(other, self)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return sub(self, other)

    def __rsub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return div(self, other)

    def __rtruediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)


class Tape:
    """Append-only record of nodes; single-threaded."""

    def __init__(self):
        self.nodes: List[Node] = []

    def variable(self, value: Number, name: str = "input") -> Node:
        """Create a leaf node."""
        return self._record(np.array(value, dtype=float), f"leaf:{name}", (), ())

    def _record(self, value: np.ndarray, op: str, parents: Sequence[Node], partials: Sequence[Callable]) -> Node:
        node = Node(self, len(self.nodes), value, op, tuple(p.index for p in parents), tuple(partials))
        self.nodes.append(node)
        return node

    def backward(self, output: Node) -> Dict[int, np.ndarray]:
        """
        Reverse sweep from a scalar output.

        Args:
            output: Node of size 1 recorded on this tape

        Returns:
            Mapping node index -> adjoint (only nodes the output depends on)
        """
        if output.tape is not self:
            raise ValidationError("Output node belongs to a different tape")
        if output.value.size != 1:
            raise ValidationError(f"Backward needs a scalar output, got shape {output.value.shape}")

        adjoints: Dict[int, np.ndarray] = {output.index: np.ones_like(output.value)}
        for index in range(output.index, -1, -1):
            grad = adjoints.get(index)
            if grad is None:
                continue
            node = self.nodes[index]
            for parent, partial in zip(node.parents, node.partials):
                contribution = partial(grad)
                if parent in adjoints:
                    adjoints[parent] = adjoints[parent] + contribution
                else:
                    adjoints[parent] = contribution
        return adjoints


# ---------------------------------------------------------------------------
# Primitive recording
# ---------------------------------------------------------------------------

def _tape_of(*args) -> Optional[Tape]:
    tape = None
    for arg in args:
        if isinstance(arg, Node):
            if tape is None:
                tape = arg.tape
            elif arg.tape is not tape:
                raise ValidationError("Cannot combine nodes from different tapes")
    return tape


def _value(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=float)


def _binary(op: str, a, b, forward: Callable, grad_a: Callable, grad_b: Callable):
    """Record ``forward(a, b)``; ``grad_*(g, av, bv, out)`` give unbroadcast-free partials."""
    tape = _tape_of(a, b)
    av, bv = _value(a), _value(b)
    out = forward(av, bv)
    if tape is None:
        return out

    parents, partials = [], []
    if isinstance(a, Node):
        parents.append(a)
        partials.append(lambda g, av=av, bv=bv, out=out: _unbroadcast(grad_a(g, av, bv, out), av.shape))
    if isinstance(b, Node):
        parents.append(b)
        partials.append(lambda g, av=av, bv=bv, out=out: _unbroadcast(grad_b(g, av, bv, out), bv.shape))
    return tape._record(np.asarray(out, dtype=float), op, parents, partials)


def _unary(op: str, x, forward: Callable, derivative: Callable):
    """Record elementwise ``forward(x)`` with local derivative ``derivative(xv, out)``."""
    if not isinstance(x, Node):
        return forward(np.asarray(x, dtype=float))
    xv = x.value
    out = np.asarray(forward(xv), dtype=float)
    return x.tape._record(out, op, [x], [lambda g, xv=xv, out=out: g * derivative(xv, out)])


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y, o: g, lambda g, x, y, o: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y, o: g, lambda g, x, y, o: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y, o: g * y, lambda g, x, y, o: g * x)


def div(a, b):
    bv = _value(b)
    if np.any(bv == 0):
        raise AutodiffError("division by zero", _describe(b))
    return _binary("div", a, b, lambda x, y: x / y, lambda g, x, y, o: g / y, lambda g, x, y, o: -g * o / y)


def neg(x):
    return _unary("neg", x, lambda v: -v, lambda v, o: -1.0)


def power(x, exponent: int):
    """Integer power ``x ** n``."""
    if isinstance(exponent, (bool, np.bool_)) or int(exponent) != exponent:
        raise ValidationError(f"Only integer exponents are supported, got {exponent!r}")
    n = int(exponent)
    if n < 0 and np.any(_value(x) == 0):
        raise AutodiffError("division by zero in negative power", _describe(x))
    if n == 0:
        return _unary("pow0", x, lambda v: np.ones_like(v), lambda v, o: 0.0)
    return _unary(f"pow{n}", x, lambda v: v ** n, lambda v, o: n * v ** (n - 1))


def exp(x):
    if isinstance(x, Jet):
        return jet_exp(x)
    return _unary("exp", x, np.exp, lambda v, o: o)


def log(x):
    if isinstance(x, Jet):
        return jet_log(x)
    if np.any(_value(x) <= 0):
        raise AutodiffError("log of non-positive value", _describe(x))
    return _unary("log", x, np.log, lambda v, o: 1.0 / v)


def sqrt(x):
    if isinstance(x, Jet):
        return jet_sqrt(x)
    if np.any(_value(x) < 0):
        raise AutodiffError("sqrt of negative value", _describe(x))
    return _unary("sqrt", x, np.sqrt, lambda v, o: 0.5 / o)


def tanh(x):
    if isinstance(x, Jet):
        return jet_tanh(x)
    return _unary("tanh", x, np.tanh, lambda v, o: 1.0 - o * o)


def sigmoid(x):
    if isinstance(x, Jet):
        return jet_sigmoid(x)
    return _unary("sigmoid", x, expit, lambda v, o: o * (1.0 - o))


def sin(x):
    if isinstance(x, Jet):
        return jet_sin(x)
    return _unary("sin", x, np.sin, lambda v, o: np.cos(v))


def cos(x):
    if isinstance(x, Jet):
        return jet_cos(x)
    return _unary("cos", x, np.cos, lambda v, o: -np.sin(v))


def matmul(a, b):
    """Matrix product of 2-D operands."""
    tape = _tape_of(a, b)
    av, bv = _value(a), _value(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ValidationError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    out = av @ bv
    if tape is None:
        return out
    parents, partials = [], []
    if isinstance(a, Node):
        parents.append(a)
        partials.append(lambda g, bv=bv: g @ bv.T)
    if isinstance(b, Node):
        parents.append(b)
        partials.append(lambda g, av=av: av.T @ g)
    return tape._record(out, "matmul", parents, partials)


def sum(x, axis: Optional[int] = None):  # noqa: A001 - mirrors numpy
    """Sum over all entries or one axis."""
    if not isinstance(x, Node):
        return np.sum(np.asarray(x, dtype=float), axis=axis)
    shape = x.value.shape
    out = np.asarray(np.sum(x.value, axis=axis), dtype=float)

    def partial(g, shape=shape, axis=axis):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return x.tape._record(out, "sum", [x], [partial])


def mean(x, axis: Optional[int] = None):
    """Arithmetic mean over all entries or one axis."""
    size = _value(x).size if axis is None else _value(x).shape[axis]
    return sum(x, axis=axis) / float(size)


def getitem(x, key):
    """Indexing / slicing."""
    if not isinstance(x, Node):
        return np.asarray(x, dtype=float)[key]
    shape = x.value.shape
    out = np.asarray(x.value[key], dtype=float)

    def partial(g, shape=shape, key=key):
        full = np.zeros(shape)
        np.add.at(full, key, g)
        return full

    return x.tape._record(out, "getitem", [x], [partial])


def _describe(x) -> Optional[str]:
    return x.describe() if isinstance(x, Node) else None


def value_of(x) -> np.ndarray:
    """Numeric value of a node, jet primal or plain number."""
    if isinstance(x, Jet):
        return value_of(x.primal)
    return _value(x)


# ---------------------------------------------------------------------------
# Second-order Taylor jets
# ---------------------------------------------------------------------------

def _is_zero(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x == 0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


def _neg(a):
    return 0.0 if _is_zero(a) else -a


class Jet:
    """
    Truncated Taylor value ``(u, du/dx, d2u/dx2)`` in one scalar input.

    Components may be floats, numpy arrays or taped :class:`Node` objects;
    a literal ``0.0`` tangent marks a quantity that does not depend on x.
    """

    __slots__ = ("primal", "first", "second")

    __array_ufunc__ = None

    def __init__(self, primal, first=0.0, second=0.0):
        self.primal = primal
        self.first = first
        self.second = second

    @classmethod
    def constant(cls, value) -> "Jet":
        return cls(value, 0.0, 0.0)

    @classmethod
    def seed(cls, x) -> "Jet":
        """Jet of the independent variable itself."""
        return cls(x, 1.0, 0.0)

    def __repr__(self) -> str:
        return f"Jet({self.primal!r}, {self.first!r}, {self.second!r})"

    @staticmethod
    def lift(x) -> "Jet":
        return x if isinstance(x, Jet) else Jet.constant(x)

    def __add__(self, other):
        other = Jet.lift(other)
        return Jet(self.primal + other.primal, _add(self.first, other.first), _add(self.second, other.second))

    __radd__ = __add__

    def __sub__(self, other):
        other = Jet.lift(other)
        return Jet(self.primal - other.primal, _add(self.first, _neg(other.first)),
                   _add(self.second, _neg(other.second)))

    def __rsub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return Jet.lift(other) - self

    def __neg__(self):
        return Jet(-self.primal, _neg(self.first), _neg(self.second))

    def __mul__(self, other):
        other = Jet.lift(other)
        a0, a1, a2 = self.primal, self.first, self.second
        b0, b1, b2 = other.primal, other.first, other.second
        first = _add(_mul(a1, b0), _mul(a0, b1))
        second = _add(_add(_mul(a2, b0), _mul(2.0, _mul(a1, b1))), _mul(a0, b2))
        return Jet(a0 * b0, first, second)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Jet.lift(other)
        b0, b1, b2 = other.primal, other.first, other.second
        if np.any(value_of(b0) == 0):
            raise AutodiffError("division by zero in jet", _describe(b0))
        q0 = self.primal / b0
        q1 = _add(self.first, _neg(_mul(q0, b1)))
        q1 = 0.0 if _is_zero(q1) else q1 / b0
        q2 = _add(_add(self.second, _neg(_mul(2.0, _mul(q1, b1)))), _neg(_mul(q0, b2)))
        q2 = 0.0 if _is_zero(q2) else q2 / b0
        return Jet(q0, q1, q2)

    def __rtruediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        return Jet.lift(other) / self

    def __pow__(self, exponent: int):
        if int(exponent) != exponent:
            raise ValidationError(f"Only integer exponents are supported, got {exponent!r}")
        n = int(exponent)
        if n == 0:
            return Jet.constant(power(self.primal, 0))
        if n == 1:
            return Jet(self.primal, self.first, self.second)
        u = self.primal
        d1 = n * power(u, n - 1)
        d2 = n * (n - 1) * power(u, n - 2) if n != 1 else 0.0
        return _chain(self, power(u, n), d1, d2)

    def __matmul__(self, other):
        if isinstance(other, Jet):
            raise ValidationError("Jet @ Jet is not supported; weights must be constant in x")
        return Jet(matmul(self.primal, other), _matmul_tangent(self.first, other),
                   _matmul_tangent(self.second, other))


def _matmul_tangent(tangent, weights):
    return 0.0 if _is_zero(tangent) else matmul(tangent, weights)


def _chain(u: Jet, f0, d1, d2) -> Jet:
    """Compose an elementwise function with value f0, f'(u)=d1, f''(u)=d2."""
    first = _mul(d1, u.first)
    second = _add(_mul(d1, u.second), _mul(d2, _mul(u.first, u.first)))
    return Jet(f0, first, second)


def jet_exp(u: Jet) -> Jet:
    e = exp(u.primal)
    return _chain(u, e, e, e)


def jet_log(u: Jet) -> Jet:
    inv = 1.0 / u.primal if isinstance(u.primal, Node) else 1.0 / np.asarray(u.primal, dtype=float)
    return _chain(u, log(u.primal), inv, -(inv * inv))


def jet_tanh(u: Jet) -> Jet:
    t = tanh(u.primal)
    d1 = 1.0 - t * t
    return _chain(u, t, d1, -2.0 * t * d1)


def jet_sigmoid(u: Jet) -> Jet:
    s = sigmoid(u.primal)
    d1 = s * (1.0 - s)
    return _chain(u, s, d1, d1 * (1.0 - 2.0 * s))


def jet_sqrt(u: Jet) -> Jet:
    r = sqrt(u.primal)
    d1 = 0.5 / r
    return _chain(u, r, d1, -0.25 / (r * r * r))


def jet_sin(u: Jet) -> Jet:
    s = sin(u.primal)
    return _chain(u, s, cos(u.primal), -s)


def jet_cos(u: Jet) -> Jet:
    c = cos(u.primal)
    return _chain(u, c, -sin(u.primal), -c)



# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def value_and_grad(fn: Callable[..., Node], *blocks: Number) -> Tuple[float, List[np.ndarray]]:
    """
    Evaluate ``fn`` on taped copies of ``blocks`` and return gradients.

    Args:
        fn: Function of one node per block returning a scalar expression
        *blocks: Numeric parameter blocks

    Returns:
        (loss value, list of gradients shaped like the blocks)
    """
    tape = Tape()
    leaves = [tape.variable(block, name=f"block{i}") for i, block in enumerate(blocks)]
    out = fn(*leaves)
    if not isinstance(out, Node):
        value = float(np.asarray(out, dtype=float).reshape(-1)[0])
        return value, [np.zeros(np.shape(block)) for block in blocks]

    adjoints = tape.backward(out)
    grads = [adjoints.get(leaf.index, np.zeros(leaf.value.shape)).reshape(leaf.value.shape) for leaf in leaves]
    return float(out.value.reshape(-1)[0]), grads


def grad(fn: Callable[[Node], Node], theta: Number) -> np.ndarray:
    """
    Gradient of a scalar expression with respect to a parameter vector.

    Args:
        fn: Function of the taped parameter vector
        theta: Parameter values

    Returns:
        dloss/dtheta, same shape as theta
    """
    _, (gradient,) = value_and_grad(fn, theta)
    return gradient


def input_derivs(f: Callable, x: float) -> Tuple[float, float, float]:
    """
    Value, first and second derivative of a scalar function of one input.

    Args:
        f: Function built from the supported primitives or Jet arithmetic
        x: Evaluation point

    Returns:
        (f(x), f'(x), f''(x))
    """
    out = f(Jet.seed(float(x)))
    if not isinstance(out, Jet):
        return float(out), 0.0, 0.0
    return (float(value_of(out.primal)), float(value_of(out.first)), float(value_of(out.second)))


def grad_of_input_deriv(
    model: Callable[[Node, Jet], Jet],
    theta: Number,
    points: Sequence[float],
    residual: Callable[[np.ndarray, Jet], object],
) -> Tuple[float, np.ndarray]:
    """
    Parameter gradient of a mean-squared residual built from input derivatives.

    ``loss(theta) = mean_j residual(x_j, u_jet(x_j))**2`` where
    ``u_jet = model(theta, Jet.seed(x))`` carries u, u' and u''.

    Args:
        model: Function of (taped theta, input jet) returning an output jet
        theta: Parameter values
        points: Collocation points
        residual: Function of (points, output jet) returning residual values

    Returns:
        (loss value, gradient)
    """
    xs = np.asarray(points, dtype=float)

    def loss(theta_node):
        u = model(theta_node, Jet.seed(xs))
        r = residual(xs, u)
        return mean(r * r)

    value, (gradient,) = value_and_grad(loss, theta)
    return value, gradient
