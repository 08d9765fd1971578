"""Dense tensors with reverse-mode automatic differentiation.

A ``ComputationRecord`` is an ordered tape. While one is active (``with
ComputationRecord() as rec:``), every primitive whose inputs track gradients
appends a node holding its inputs, its output and a vector-Jacobian rule.
Appending in evaluation order keeps the tape topologically sorted, so the
backward pass is a single reverse sweep.

Broadcasting follows right-aligned numpy rules: an operand may lack leading
axes or carry singleton axes. Anything else is rejected with both shapes in
the message.
"""
import itertools

import numpy as np

from rangeflow import error

_node_ids = itertools.count()
_active_records = []
_default_dtype = np.float64


def set_default_dtype(dtype):
    """Sets the dtype of newly created tensors (float64 or float32).
    """
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise error.InvalidArgument('unsupported tensor dtype {}'.format(dtype))
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


class _Node(object):
    __slots__ = ('op', 'inputs', 'output', 'vjp')

    def __init__(self, op, inputs, output, vjp):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


class ComputationRecord(object):
    """Ordered record of primitive operations for one objective.

    Args:
        retain (boolean): keep the recorded nodes after ``backward`` so the
            record can be replayed; by default it is cleared
    """

    def __init__(self, retain=False):
        self.retain = retain
        self.nodes = []
        self._leaves = {}

    def __enter__(self):
        _active_records.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        assert _active_records and _active_records[-1] is self
        _active_records.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def add(self, op, inputs, output, vjp):
        self.nodes.append(_Node(op, inputs, output, vjp))
        output._record = self
        for tensor in inputs:
            if tensor.requires_grad and tensor.is_leaf:
                self._leaves[tensor.node_id] = tensor

    def clear(self):
        for node in self.nodes:
            node.output._record = None
        self.nodes = []
        self._leaves = {}

    def backward(self, objective):
        """Populates ``grad`` on every tracked leaf used in this record.

        Leaves that the objective does not depend on receive an exact zero
        gradient. Gradients accumulate into an existing ``grad``.
        """
        if objective.size != 1:
            raise error.ShapeError(
                'backward needs a scalar objective, got shape {}'.format(objective.shape))
        if objective._record is not self:
            raise error.InvalidArgument(
                'objective was not produced under this ComputationRecord')

        grads = {objective.node_id: np.ones_like(objective.data)}
        for node in reversed(self.nodes):
            grad = grads.pop(node.output.node_id, None)
            if grad is None:
                continue
            for tensor, input_grad in zip(node.inputs, node.vjp(grad)):
                if input_grad is None or not tensor.requires_grad:
                    continue
                key = tensor.node_id
                if key in grads:
                    grads[key] = grads[key] + input_grad
                else:
                    grads[key] = input_grad

        for key, leaf in self._leaves.items():
            grad = grads.get(key)
            if grad is None:
                grad = np.zeros_like(leaf.data)
            grad = np.asarray(grad, dtype=leaf.data.dtype).reshape(leaf.shape)
            leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad

        if not self.retain:
            self.clear()


class Tensor(object):
    """A dense array with optional gradient tracking.

    Args:
        data (array_like): values, copied into a row-major array
        requires_grad (boolean): whether this tensor is a tracked leaf
        name (string): optional label, used in optimizer diagnostics
        dtype: defaults to the module default (float64 unless changed)
    """
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self.is_leaf = True
        self.node_id = next(_node_ids)
        self._record = None

    @classmethod
    def _result(cls, op, data, inputs, vjp):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.node_id = next(_node_ids)
        out._record = None
        record = _active_records[-1] if _active_records else None
        tracked = record is not None and any(t.requires_grad for t in inputs)
        out.requires_grad = tracked
        out.is_leaf = not tracked
        if tracked:
            record.add(op, inputs, out, vjp)
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        if self._record is None:
            raise error.InvalidArgument(
                'objective was not produced under an active ComputationRecord')
        self._record.backward(self)

    def __repr__(self):
        return 'Tensor(shape={}, requires_grad={})'.format(self.shape, self.requires_grad)

    # Operators
    # ----------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return take_slice(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def tanh(self):
        return tanh(self)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _broadcast_shape(op, shape_a, shape_b):
    ndim = max(len(shape_a), len(shape_b))
    padded_a = (1,) * (ndim - len(shape_a)) + tuple(shape_a)
    padded_b = (1,) * (ndim - len(shape_b)) + tuple(shape_b)
    out = []
    for a, b in zip(padded_a, padded_b):
        if a != b and a != 1 and b != 1:
            raise error.ShapeError(
                '{}: shapes {} and {} do not conform'.format(op, tuple(shape_a), tuple(shape_b)))
        out.append(max(a, b))
    return tuple(out)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise binary primitives
# ----------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a.shape, b.shape)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return Tensor._result('add', a.data + b.data, (a, b), vjp)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a.shape, b.shape)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return Tensor._result('sub', a.data - b.data, (a, b), vjp)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a.shape, b.shape)

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return Tensor._result('mul', a.data * b.data, (a, b), vjp)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('div', a.shape, b.shape)

    def vjp(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return Tensor._result('div', a.data / b.data, (a, b), vjp)


def neg(x):
    x = as_tensor(x)
    return Tensor._result('neg', -x.data, (x,), lambda g: (-g,))


def power(x, exponent):
    x = as_tensor(x)
    exponent = float(exponent)

    def vjp(g):
        return (g * exponent * x.data ** (exponent - 1.0),)
    return Tensor._result('power', x.data ** exponent, (x,), vjp)


# Linear algebra and shape primitives
# ----------------------------

def matmul(a, b):
    """Matrix product over the last two axes. ``b`` is either a matrix
    shared across ``a``'s leading axes or has the same leading axes as ``a``.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise error.ShapeError('matmul: shapes {} and {} do not conform'.format(a.shape, b.shape))
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise error.ShapeError('matmul: shapes {} and {} do not conform'.format(a.shape, b.shape))

    def vjp(g):
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        if b.ndim == 2 and grad_b.ndim > 2:
            grad_b = grad_b.reshape((-1,) + b.shape).sum(axis=0)
        return grad_a, grad_b
    return Tensor._result('matmul', a.data @ b.data, (a, b), vjp)


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise error.ShapeError('reshape: cannot reshape {} into {}'.format(x.shape, shape))
    return Tensor._result('reshape', data, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise error.ShapeError('transpose: axes {} invalid for shape {}'.format(axes, x.shape))
    inverse = tuple(np.argsort(axes))
    return Tensor._result('transpose', x.data.transpose(axes), (x,),
                          lambda g: (g.transpose(inverse),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise error.ShapeError('concat: nothing to concatenate')
    ndim = tensors[0].ndim
    axis = axis % ndim
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != reference[i] for i in range(ndim) if i != axis):
            raise error.ShapeError('concat: shapes {} do not conform along axis {}'.format(
                [t.shape for t in tensors], axis))
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))
    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._result('concat', data, tuple(tensors), vjp)


def take_slice(x, index):
    x = as_tensor(x)
    data = x.data[index]
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(p is None or p is Ellipsis or isinstance(p, (int, np.integer, slice)) for p in parts)

    def vjp(g):
        grad = np.zeros_like(x.data)
        if basic:
            grad[index] += g
        else:
            np.add.at(grad, index, g)
        return (grad,)
    return Tensor._result('slice', np.array(data), (x,), vjp)


def gather(x, index, axis=0):
    """Selects entries of ``x`` along ``axis`` by an integer index array;
    the indexed axis is replaced by the index array's axes.
    """
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    axis = axis % x.ndim
    if index.size and (index.min() < -x.shape[axis] or index.max() >= x.shape[axis]):
        raise error.ShapeError('gather: index out of range for axis {} of shape {}'.format(axis, x.shape))

    def vjp(g):
        grad = np.zeros_like(x.data)
        moved = np.moveaxis(g, list(range(axis, axis + index.ndim)), list(range(index.ndim)))
        np.add.at(np.moveaxis(grad, axis, 0), index, moved)
        return (grad,)
    return Tensor._result('gather', np.take(x.data, index, axis=axis), (x,), vjp)


# Reductions
# ----------------------------

def reduce_sum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return Tensor._result('sum', np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), vjp)


def reduce_mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return reduce_sum(x, axis, keepdims) * (1.0 / count)


# Elementwise unary primitives
# ----------------------------

def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)
    return Tensor._result('exp', y, (x,), lambda g: (g * y,))


def log(x):
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise error.DomainError('log of negative input (min {})'.format(x.data.min()))
    return Tensor._result('log', np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x):
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise error.DomainError('sqrt of negative input (min {})'.format(x.data.min()))
    y = np.sqrt(x.data)
    return Tensor._result('sqrt', y, (x,), lambda g: (g * 0.5 / y,))


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    return Tensor._result('tanh', y, (x,), lambda g: (g * (1.0 - y * y),))


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    y = shifted / shifted.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
    return Tensor._result('softmax', y, (x,), vjp)


class no_record(object):
    """Suspends recording inside an active ComputationRecord, e.g. while an
    ODE solver evaluates the model.
    """

    def __enter__(self):
        _active_records.append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        assert _active_records and _active_records[-1] is None
        _active_records.pop()
        return False
