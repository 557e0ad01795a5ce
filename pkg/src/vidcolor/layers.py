"""Building blocks shared by the generator and critic."""
import torch
import torch.nn.functional as F
from torch import nn

LEAKY_SLOPE = 0.2


class InstanceNorm(nn.Module):
    """Per-sample, per-channel normalization with affine parameters.

    Unlike ``nn.InstanceNorm2d`` this accepts 1x1 feature maps (the output
    is then just the bias), which tiny test configurations hit at the bottleneck.
    """

    def __init__(self, channels, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)


def conv_block(in_ch, out_ch, kernel=3, stride=1, norm=True, act=True):
    pad = (kernel - 1) // 2 if stride == 1 else (kernel - stride + 1) // 2
    layers = [nn.Conv2d(in_ch, out_ch, kernel, stride, pad)]
    if norm:
        layers.append(InstanceNorm(out_ch))
    if act:
        layers.append(nn.LeakyReLU(LEAKY_SLOPE))
    return nn.Sequential(*layers)


class NonLocalBlock(nn.Module):
    """Single-head spatial self-attention with a zero-initialized residual gate.

    out = x + gamma * attention(x); with gamma = 0 at construction the block
    is the identity map until training moves the gate.
    """

    def __init__(self, channels, reduction=8):
        super().__init__()
        inner = max(1, channels // reduction)
        self.query = nn.Conv2d(channels, inner, 1)
        self.key = nn.Conv2d(channels, inner, 1)
        self.value = nn.Conv2d(channels, channels, 1)
        self.gamma = nn.Parameter(torch.zeros(()))

    def forward(self, x):
        B, C, H, W = x.shape
        q = self.query(x).flatten(2).transpose(1, 2)  # B, N, inner
        k = self.key(x).flatten(2)  # B, inner, N
        attn = torch.softmax(torch.bmm(q, k), dim=-1)  # B, N, N
        v = self.value(x).flatten(2)  # B, C, N
        out = torch.bmm(v, attn.transpose(1, 2)).view(B, C, H, W)
        return x + self.gamma * out


def _l2_normalize(vec, eps):
    return vec / vec.norm().clamp_min(eps)


def spectral_normalize(weight, u, v, power_iterations=1, eps=1e-12):
    """Divide ``weight`` by its largest singular value, estimated by power iteration.

    ``weight`` is viewed as a (out_features x rest) matrix. ``u`` and ``v``
    are the persistent left/right singular vector estimates and are updated
    in place. The estimate is floored at ``eps``, so a zero matrix comes back
    unchanged. Gradients flow through the estimate, not through ``u``/``v``.
    """
    mat = weight.reshape(weight.shape[0], -1)
    with torch.no_grad():
        for _ in range(power_iterations):
            new_v = mat.t() @ u
            if new_v.norm() > eps:
                v.copy_(_l2_normalize(new_v, eps))
            new_u = mat @ v
            if new_u.norm() > eps:
                u.copy_(_l2_normalize(new_u, eps))
    sigma = torch.dot(u.clone(), mat @ v.clone())
    return weight / sigma.abs().clamp_min(eps)


class SNConv2d(nn.Module):
    """Conv2d whose weight is spectrally normalized on every forward pass.

    In training mode each forward advances the power iteration; in eval mode
    the stored vectors are reused as-is.
    """

    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0,
                 power_iterations=1, warmup_iterations=20):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.power_iterations = power_iterations
        self.weight_orig = nn.Parameter(torch.empty(out_ch, in_ch, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        nn.init.xavier_uniform_(self.weight_orig)
        rest = in_ch * kernel * kernel
        self.register_buffer("u", _l2_normalize(torch.randn(out_ch), 1e-12))
        self.register_buffer("v", _l2_normalize(torch.randn(rest), 1e-12))
        with torch.no_grad():
            spectral_normalize(self.weight_orig, self.u, self.v, warmup_iterations)

    def normalized_weight(self, update=False):
        return spectral_normalize(self.weight_orig, self.u, self.v,
                                  self.power_iterations if update else 0)

    def forward(self, x):
        w = self.normalized_weight(update=self.training)
        return F.conv2d(x, w, self.bias, self.stride, self.padding)
