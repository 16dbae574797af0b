"""Walk through the tensor engine: kernels, the tape, and gradient checks.

Run:  python demos/01_tensor_autodiff.py
"""

import numpy as np

from strokenet.tensor import (
    Tensor, backward, conv3d, cross_entropy, linear, maxpool3d, mul, relu,
    softmax, tsum,
)
from strokenet.gradcheck import grad_check
from strokenet.optim import OptimizerConfig, Parameter, sgd_step

rng = np.random.default_rng(0)

# A video-shaped volume: batch x channels x time x height x width.
clip = Tensor(rng.random((1, 3, 4, 8, 8)), requires_grad=True)
weight = Tensor(rng.standard_normal((4, 3, 3, 3, 3)) * 0.2, requires_grad=True)
bias = Tensor(np.zeros(4), requires_grad=True)

out = relu(conv3d(clip, weight, bias))          # same T/H/W (padding 1)
pooled = maxpool3d(out, (2, 2, 2))              # ceil-mode: 4x8x8 -> 2x4x4
print("conv output:", out.shape, "-> pooled:", pooled.shape)

flat = pooled.reshape((1, -1))
head_w = Tensor(rng.standard_normal((5, flat.shape[1])) * 0.1, requires_grad=True)
head_b = Tensor(np.zeros(5), requires_grad=True)
probs = softmax(linear(flat, head_w, head_b))
print("class probabilities:", np.round(probs.data[0], 3), "sum", probs.data.sum())

loss = cross_entropy(probs, np.array([2]))
backward(loss)
print("loss:", loss.item())
print("conv weight grad magnitude:", float(np.abs(weight.grad).max()))

# Central finite differences agree with the tape (checked at a fresh leaf).
feat = Tensor(flat.data.copy(), requires_grad=True)
err = grad_check(lambda t: cross_entropy(
    softmax(linear(t, head_w, head_b)), np.array([2])), feat)
print("grad check on the head, max rel err:", err)

# One momentum step moves the weights against the gradient.
p = Parameter("demo", Tensor(np.array([1.0, -2.0])))
p.value.grad = np.array([0.5, -0.5])
sgd_step([p], OptimizerConfig(learning_rate=0.1, momentum=0.5))
print("sgd step:", p.value.data)

# Sanity: d(sum(x*x))/dx == 2x
x = Tensor(rng.standard_normal(4), requires_grad=True)
backward(tsum(mul(x, x)))
print("2x check:", np.allclose(x.grad, 2 * x.data))
