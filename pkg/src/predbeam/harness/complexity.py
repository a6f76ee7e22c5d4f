"""Operation-count model of the conv-LSTM network for offline training and online inference."""

from __future__ import annotations

from dataclasses import dataclass

from ..hcl import HclConfig

__all__ = ["ComplexityReport", "complexity_report"]


@dataclass(frozen=True)
class ComplexityReport:
    tau: int
    k_vehicles: int
    in_channels: int       # n_0
    kernel_area: int       # s_1^2
    filters: int           # n_1
    map_rows: int          # a_1
    map_cols: int          # b_1
    lstm_in: int           # kappa_1
    lstm_out: int          # kappa_2
    iterations: int        # I_t
    n_examples: int        # N_e

    @property
    def conv_per_step(self) -> int:
        return self.in_channels * self.kernel_area * self.filters * self.map_rows * self.map_cols

    @property
    def cnn_term(self) -> int:
        return self.tau * self.k_vehicles * self.conv_per_step

    @property
    def lstm_term(self) -> int:
        k1, k2 = self.lstm_in, self.lstm_out
        return 4 * self.tau * (k1 * k2 + k2 * k2 + k2)

    @property
    def online(self) -> int:
        return self.cnn_term + self.lstm_term

    @property
    def offline(self) -> int:
        return self.iterations * self.n_examples * self.online

    def render(self) -> str:
        lines = [
            "bindings:",
            f"  tau = {self.tau}, K = {self.k_vehicles}",
            f"  conv layer 1: n0 = {self.in_channels}, s^2 = {self.kernel_area}, "
            f"n1 = {self.filters}, a1 = {self.map_rows}, b1 = {self.map_cols}",
            f"  LSTM: kappa1 = {self.lstm_in}, kappa2 = {self.lstm_out}",
            f"  I_t = {self.iterations}, N_e = {self.n_examples}",
            "terms:",
            f"  CNN  tau*K*sum_l n_(l-1) s_l^2 n_l a_l b_l = {self.cnn_term:,}",
            f"  LSTM 4*tau*(k1*k2 + k2^2 + k2)            = {self.lstm_term:,}",
            "totals:",
            f"  online  (one prediction)  = {self.online:,}",
            f"  offline (I_t * N_e * ...) = {self.offline:,}",
        ]
        return "\n".join(lines) + "\n"


def complexity_report(cfg: HclConfig, iterations: int = 6, n_examples: int = 2000) -> ComplexityReport:
    """Bind the operation-count expressions to the network's actual dimensions.

    ``iterations`` is the number of passes over the training set.  The
    convolution uses same padding, so its feature map is ``Nt x 1``.
    """
    if iterations < 0 or n_examples < 0:
        raise ValueError("iterations and n_examples must be nonnegative")
    kh, kw = cfg.conv_kernel
    return ComplexityReport(tau=cfg.tau, k_vehicles=cfg.k_vehicles, in_channels=2,
                            kernel_area=kh * kw, filters=cfg.conv_filters, map_rows=cfg.n_tx,
                            map_cols=1, lstm_in=cfg.concat_dim, lstm_out=cfg.lstm_hidden,
                            iterations=iterations, n_examples=n_examples)
