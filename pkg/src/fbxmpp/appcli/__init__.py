"""Network definition files, device runners and the bundled applications."""

from .netdef import NetDefDocument, NetDefError, load_netdef, parse_netdef, slice_for_device
from .runner import InitError, repl_execute, run_device, start_device
