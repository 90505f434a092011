"""Collects every experiment command for registration on the command group."""

# License: MIT

from app.experiments.commands.bv_commands import alpha, bad_mass, half_space_constant, perimeter, straighten
from app.experiments.commands.collapse_commands import collapse, moving_char, scale_compare
from app.experiments.commands.config_commands import run
from app.experiments.commands.metric_commands import cayley_ball, coarea, distortion, slice_command, tv_identity

COMMANDS = [
    cayley_ball, distortion, slice_command, coarea, tv_identity,
    perimeter, alpha, bad_mass, straighten, half_space_constant,
    collapse, scale_compare, moving_char,
    run,
]
