"""Turn directories of labeled audio clips into AEMB embedding files.

One vector per clip, at the dimension fixed by the chosen extractor
model. Output files are consumed by the ``collm`` toolkit; the AEMB wire
format is the only coupling between the two packages.
"""

from aad_extractor.extract import ExtractJob, run_extract
from aad_extractor.ptms import PTM_DIMS

__version__ = "0.1.0"

__all__ = ["ExtractJob", "run_extract", "PTM_DIMS"]
