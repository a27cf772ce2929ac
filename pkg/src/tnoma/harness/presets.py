"""Named experiment presets at desk or full scale.

Full scale uses the standard settings (131072 training and test frames,
20 epochs, batch 32, lr 3e-3, training at 30 dB).  Desk scale keeps every
physical parameter and only shrinks the Monte Carlo and training budgets
by the factors in ``DESK_BUDGET`` so each preset fits in roughly one core
hour on a workstation.
"""

import dataclasses

from .config import ExperimentConfig

SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)

# name -> (description, overrides common to both scales)
PRESETS = {
    "fig4": ("SVD vs one-user Rayleigh vs user selection vs AE8 with MLP-PA (and MLP-T)",
             dict(scenario="svd-ber,ber-theory,user-selection-ber,ae-train", variant="AE8",
                  use_pa=True, sweep_key="use_t", sweep_values=("false", "true"))),
    "fig6": ("SVD vs AE5 under CE, MSE-identity and MSE-tanh training",
             dict(scenario="svd-ber,ae-train", variant="AE5", sweep_key="loss",
                  sweep_values=("ce", "mse-identity", "mse-tanh"))),
    "fig7": ("SVD vs the nine AE variants",
             dict(scenario="svd-ber,ae-train", sweep_key="variant",
                  sweep_values=tuple(f"AE{i}" for i in range(1, 10)))),
    "fig8": ("AE5 with CE only vs CE plus Q-function loss",
             dict(scenario="ae-train", variant="AE5", loss="ce+q", kappa=4.0,
                  sweep_key="alpha", sweep_values=("0.0", "0.3"))),
    "fig9": ("imperfect CSI (variance 0.01): SVD vs AE5, AE5+MLP-PA, AE5+MLP-PA+MLP-T",
             dict(scenario="svd-ber,ae-train", variant="AE5", csi_variance=0.01,
                  sweep_key="use_pa,use_t", sweep_values=("false/false", "true/false",
                                                          "true/true"))),
    "fig11": ("timing error of width w x tau_design: SVD vs AE5 with MLP-PA",
              dict(scenario="svd-ber,ae-train", variant="AE5", use_pa=True,
                   sweep_key="timing_width", sweep_values=("0.0", "0.08", "0.16"))),
    "fig12": ("CSI variance 0.01 and timing width 16%: SVD vs AE5+MLP-PA (+MLP-T)",
              dict(scenario="svd-ber,ae-train", variant="AE5", csi_variance=0.01,
                   timing_width=0.16, use_pa=True, sweep_key="use_t",
                   sweep_values=("false", "true"))),
    "fig14": ("achievable rates: SVD water-filling vs stronger/weaker selection, P = 2",
              dict(scenario="rates", K=2, N=512, tau_design=0.5, power_per_user=1.0,
                   waterfill="printed", sweep_key="rolloff",
                   sweep_values=("0.25", "0.5", "1.0"))),
}

# Desk budgets.  Factors relative to full scale (131072 train / test frames,
# 20 epochs, 10^4 rate draws, 10^6 theory draws).
DESK_BUDGET = {
    "default": dict(train_frames=16384, epochs=5, test_frames=4096, rate_draws=1000,
                    theory_draws=100000),
    # AE8 costs about five AE5 iterations
    "fig4": dict(train_frames=8192, epochs=2, test_frames=2048, theory_draws=100000),
    # nine variants, up to AE9
    "fig7": dict(train_frames=4096, epochs=2, test_frames=1024),
}


def preset_names():
    return tuple(PRESETS)


def preset(name, scale="desk"):
    """ExperimentConfig of preset ``name`` at ``scale`` ("desk" or "full")."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if scale not in ("desk", "full"):
        raise ValueError(f"unknown scale {scale!r}; choose desk or full")
    overrides = dict(PRESETS[name][1])
    overrides.setdefault("snr_db", SNR_GRID)
    if scale == "desk":
        budget = dict(DESK_BUDGET["default"])
        budget.update(DESK_BUDGET.get(name, {}))
        overrides.update(budget)
    overrides["output_dir"] = f"results/{name}-{scale}"
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    return ExperimentConfig(**{k: v for k, v in overrides.items() if k in fields})


def describe(name):
    return PRESETS[name][0]
