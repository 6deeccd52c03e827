import inspect

from veccost.utils import VecCostException
from veccost.fields import *
from veccost.models import *
from veccost.game import *
from veccost.adjustment import *
from veccost.dynamics import *
from veccost.track import *
from veccost.race import *

__version__ = "0.1.1"

__all__ = [
    name
    for name, obj in list(locals().items())
    if not name.startswith("_") and (inspect.isclass(obj) or inspect.isfunction(obj))
]
