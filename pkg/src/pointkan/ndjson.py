import json
from typing import Any

import numpy as np


class NumpyEncoder(json.JSONEncoder):
    """
    Encode numpy scalars and arrays as the equivalent Python numbers and
    lists.
    """

    def default(self, o: Any) -> Any:
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()

        # This line means any exceptions raised will come from the base class
        return json.JSONEncoder.default(self, o)


def ndjson_row(data):
    return json.dumps(data, cls=NumpyEncoder, separators=(",", ":")) + "\n"