# Experiment Registry

from . import decay
from . import energy
from . import lipschitz
from . import picard_contraction
from . import lorentz3d
from . import noncorot
from . import lifespan
from . import toolbox

EXPERIMENTS = {
    "decay": decay.run,
    "energy": energy.run,
    "lipschitz": lipschitz.run,
    "picard": picard_contraction.run,
    "lorentz3d": lorentz3d.run,
    "noncorot": noncorot.run,
    "lifespan": lifespan.run,
    "toolbox": toolbox.run,
}
