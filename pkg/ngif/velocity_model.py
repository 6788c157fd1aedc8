"""
速度場のパラメータ化
直接ベクトル場 u_theta とポテンシャル勾配ベースライン grad s_theta (MLP, float64)
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
import torch
from torch import nn
from torch.func import functional_call, grad, jacfwd, vmap

from ngif.errors import NumericError
from ngif.utils.rng import torch_seed

logger = logging.getLogger(__name__)

DIRECT = 'vector'
POTENTIAL = 'potential'
FIELD_KINDS = (DIRECT, POTENTIAL)

DTYPE = torch.float64


@dataclass(frozen=True)
class MlpArchitecture:
    """MLP の構成 (幅 W, 深さ L, 調和埋め込み次数 H など)"""

    dimension: int
    width: int = 196
    depth: int = 7
    harmonics: int = 4
    period: Optional[float] = None
    conditional: bool = False
    kind: str = DIRECT
    time_scale: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.depth < 1 or self.harmonics < 1 or self.dimension < 1:
            raise ValueError("width, depth, harmonics and dimension must be >= 1")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"Unknown field kind: {self.kind}")
        if self.period is not None and not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def output_dim(self) -> int:
        return self.dimension if self.kind == DIRECT else 1

    @property
    def input_dim(self) -> int:
        if self.period is None:
            return self.dimension
        return 2 * self.harmonics * self.dimension

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _mlp2(in_dim, width):
    """幅 W の2層 MLP (GELU)"""
    return nn.Sequential(nn.Linear(in_dim, width), nn.GELU(), nn.Linear(width, width))


class VelocityMlp(nn.Module):
    """
    時間 (と任意の mu) で条件付けた MLP

    各層の活性化前に条件ベクトルから作ったバイアスを加える。
    入力は任意の先頭次元を持てる: x [..., d], t [...], mu [...]
    """

    def __init__(self, arch: MlpArchitecture):
        super().__init__()
        self.arch = arch
        W = arch.width
        self.time_embed = _mlp2(1, W)
        self.param_embed = _mlp2(1, W) if arch.conditional else None
        cond_dim = 2 * W if arch.conditional else W

        dims = [arch.input_dim] + [W] * arch.depth
        self.layers = nn.ModuleList(nn.Linear(dims[i], dims[i + 1]) for i in range(arch.depth))
        self.cond_biases = nn.ModuleList(_mlp2(cond_dim, W) for _ in range(arch.depth))
        self.head = nn.Linear(W, arch.output_dim)
        self.activation = nn.GELU()  # 厳密な erf 版
        self.to(DTYPE)

    def embed(self, x):
        """周期問題では調和特徴 [sin(w0 m x), cos(w0 m x)]_{m=1..H}、それ以外は x そのもの"""
        if self.arch.period is None:
            return x
        w0 = 2.0 * math.pi / self.arch.period
        m = torch.arange(1, self.arch.harmonics + 1, dtype=x.dtype, device=x.device)
        phase = w0 * x[..., :, None] * m  # [..., d, H]
        feats = torch.cat([torch.sin(phase), torch.cos(phase)], dim=-1)
        return feats.reshape(x.shape[:-1] + (-1,))

    def condition(self, t, mu=None):
        t = torch.as_tensor(t, dtype=DTYPE) * self.arch.time_scale
        cond = self.time_embed(t[..., None])
        if self.param_embed is not None:
            if mu is None:
                raise ValueError("this architecture is conditioned on mu; pass a value")
            mu = torch.as_tensor(mu, dtype=DTYPE)
            cond = torch.cat([cond, self.param_embed(mu[..., None])], dim=-1)
        return cond

    def forward(self, x, t, mu=None):
        h = self.embed(x)
        cond = self.condition(t, mu)
        for layer, bias in zip(self.layers, self.cond_biases):
            h = self.activation(layer(h) + bias(cond))
        return self.head(h)


def init_params(module: nn.Module, seed: int) -> torch.Tensor:
    """
    重みを N(0, 2/fan_in)、バイアスを 0 で初期化

    Returns:
        torch.Tensor: 平坦化したパラメータベクトル theta
    """
    gen = torch.Generator().manual_seed(torch_seed(seed, 'init'))
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.Linear):
                fan_in = sub.weight.shape[1]
                sub.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                if sub.bias is not None:
                    sub.bias.zero_()
    return flatten_params(module)


def flatten_params(module: nn.Module) -> torch.Tensor:
    return nn.utils.parameters_to_vector(module.parameters()).detach().clone()


def _broadcast_inputs(x, t, mu):
    x = torch.as_tensor(x, dtype=DTYPE)
    batch = x.shape[:-1]
    t = torch.as_tensor(t, dtype=DTYPE).expand(batch) if torch.as_tensor(t).dim() == 0 \
        else torch.as_tensor(t, dtype=DTYPE)
    if mu is not None:
        mu = torch.as_tensor(mu, dtype=DTYPE)
        if mu.dim() == 0:
            mu = mu.expand(batch)
    return x, t, mu


def _check_finite(out, x, what='velocity'):
    if not torch.all(torch.isfinite(out)):
        bad = torch.nonzero(~torch.isfinite(out).reshape(out.shape[0], -1).all(dim=1))[0, 0]
        raise NumericError(f"non-finite {what} at input {x[bad].detach().cpu().numpy().tolist()}")
    return out


class VelocityField:
    """
    学習対象の速度場

    kind = 'vector' ならネットワーク出力をそのまま、'potential' ならスカラー出力の空間勾配を返す。
    module は (x, t, mu) -> [..., out] の任意の nn.Module で良い (テストでは線形層を使う)。
    """

    def __init__(self, module: nn.Module, kind: str = DIRECT, arch: MlpArchitecture = None):
        if kind not in FIELD_KINDS:
            raise ValueError(f"Unknown field kind: {kind}")
        self.module = module
        self.kind = kind
        self.arch = arch

    @classmethod
    def from_architecture(cls, arch: MlpArchitecture, seed: int = 0):
        module = VelocityMlp(arch)
        init_params(module, seed)
        return cls(module, arch.kind, arch)

    # パラメータ
    def parameters(self):
        return list(self.module.parameters())

    @property
    def theta(self) -> torch.Tensor:
        return flatten_params(self.module)

    def load_theta(self, theta) -> None:
        theta = torch.as_tensor(theta, dtype=DTYPE)
        expected = sum(p.numel() for p in self.module.parameters())
        if theta.numel() != expected:
            raise ValueError(f"parameter vector has {theta.numel()} entries, architecture needs {expected}")
        with torch.no_grad():
            nn.utils.vector_to_parameters(theta.clone(), self.module.parameters())

    # 1点あたりの関数 (torch.func 変換用)
    def _point_fn(self, params):
        module = self.module

        def raw(x, t, mu):
            return functional_call(module, params, (x, t, mu))

        if self.kind == DIRECT:
            return raw

        def potential_gradient(x, t, mu):
            return grad(lambda y: raw(y, t, mu)[0])(x)

        return potential_gradient

    def _params(self):
        return dict(self.module.named_parameters())

    def scalar(self, x, t, mu=None):
        """ネットワークの生出力 (ポテンシャル型ではスカラー s_theta)"""
        x, t, mu = _broadcast_inputs(x, t, mu)
        return self.module(x, t, mu)

    def __call__(self, x, t, mu=None):
        """バッチ評価 u(x, t) -> [n, d]"""
        x, t, mu = _broadcast_inputs(x, t, mu)
        if self.kind == DIRECT:
            out = self.module(x, t, mu)
        else:
            fn = self._point_fn(self._params())
            out = vmap(fn, in_dims=(0, 0, None if mu is None else 0))(x, t, mu)
        return _check_finite(out, x)

    def jacobian(self, x, t, mu=None):
        """空間ヤコビアン [n, d, d] (列 j = du/dx_j, 前進モード)"""
        x, t, mu = _broadcast_inputs(x, t, mu)
        fn = self._point_fn(self._params())
        jac = vmap(jacfwd(fn, argnums=0), in_dims=(0, 0, None if mu is None else 0))(x, t, mu)
        return _check_finite(jac, x, 'jacobian')

    def divergence(self, x, t, mu=None):
        return torch.diagonal(self.jacobian(x, t, mu), dim1=-2, dim2=-1).sum(-1)

    def numpy_closure(self, mu=None) -> Callable:
        """simulate 用の numpy クロージャ (x [n, d], t) -> [n, d]"""

        def closure(x, t):
            xt = torch.as_tensor(np.asarray(x), dtype=DTYPE)
            if self.kind == DIRECT:
                with torch.no_grad():
                    return self(xt, t, mu).numpy()
            return self(xt, t, mu).detach().numpy()

        return closure


class AnalyticField:
    """
    解析的な速度場 (torch で書かれたクロージャ) を VelocityField と同じ形で扱うアダプタ

    fn(x [..., d], t) -> [..., d]。ヤコビアンは前進モード自動微分で計算する。
    """

    kind = DIRECT

    def __init__(self, fn: Callable):
        self.fn = fn

    def parameters(self):
        return []

    def __call__(self, x, t, mu=None):
        x = torch.as_tensor(x, dtype=DTYPE)
        return self.fn(x, torch.as_tensor(t, dtype=DTYPE))

    def jacobian(self, x, t, mu=None):
        x = torch.as_tensor(x, dtype=DTYPE)
        t = torch.as_tensor(t, dtype=DTYPE)
        return vmap(jacfwd(lambda y: self.fn(y, t)))(x)

    def divergence(self, x, t, mu=None):
        return torch.diagonal(self.jacobian(x, t, mu), dim1=-2, dim2=-1).sum(-1)

    def numpy_closure(self, mu=None):
        def closure(x, t):
            with torch.no_grad():
                return self(np.asarray(x), t).numpy()
        return closure


def forward(field, x, t, mu=None):
    """u_theta(x, t) をバッチ評価"""
    return field(x, t, mu)


def spatial_jacobian(field, x, t, mu=None):
    if getattr(field, 'kind', DIRECT) == POTENTIAL:
        logger.debug("Jacobian of a potential field: forward-over-reverse (Hessian)")
    return field.jacobian(x, t, mu)


def divergence(field, x, t, mu=None):
    return field.divergence(x, t, mu)


def param_gradient(field, loss_closure: Callable[[], torch.Tensor]) -> torch.Tensor:
    """
    loss_closure() の theta に関する勾配 (逆モード) を平坦化して返す

    Raises:
        NumericError: 損失または勾配が非有限
    """
    params = field.parameters()
    loss = loss_closure()
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite loss: {loss.item()}")
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    flat = []
    names = [name for name, _ in field.module.named_parameters()]
    for index, (name, p, g) in enumerate(zip(names, params, grads)):
        g = torch.zeros_like(p) if g is None else g
        if not torch.all(torch.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {index} ({name})")
        flat.append(g.reshape(-1))
    return torch.cat(flat)
