from strip_pressure.core.model_file import load_model
from strip_pressure.core.utils import load_env
