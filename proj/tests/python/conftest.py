import os
import sys

# The compiled module lives in the CMake build tree during development;
# installed wheels put it on sys.path directly.
module_dir = os.environ.get("CSOLAB_MODULE_DIR")
if module_dir and module_dir not in sys.path:
    sys.path.insert(0, module_dir)
