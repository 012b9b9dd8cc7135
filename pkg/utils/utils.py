import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from utils.errors import ConfigError
from utils.logger import logger


def load_dataframe(file_path: Union[str, Path]) -> pd.DataFrame:
    """
    Load a DataFrame from a CSV file.

    Parameters:
    - file_path: str, path to the CSV file

    Returns:
    - pd.DataFrame: Loaded DataFrame
    """
    if str(file_path).endswith(".csv"):
        return pd.read_csv(file_path)
    raise ValueError("Unsupported file format. Please provide a .csv file.")


def store_dataframe(dataframe: pd.DataFrame, file_path: Union[str, Path]) -> Path:
    """
    Write a DataFrame as CSV with 6 significant digits, creating parent directories.

    Parameters:
    - dataframe: pd.DataFrame, the table to store
    - file_path: str, destination path

    Returns:
    - Path: the written file
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataframe.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")
    logger.info(f"Stored table as {path}")
    return path


def dataframe_to_csv_text(dataframe: pd.DataFrame) -> str:
    """Render a DataFrame with the same CSV conventions as store_dataframe."""
    return dataframe.to_csv(index=False, float_format="%.6g", lineterminator="\n")


def complex_to_dataframe(values: np.ndarray, prefix: str = "") -> pd.DataFrame:
    """
    Split a complex vector into a two-column (re, im) DataFrame.

    Parameters:
    - values: np.ndarray, complex vector
    - prefix: str, column name prefix, e.g. "h_" gives h_re / h_im
    """
    values = np.asarray(values, dtype=complex)
    return pd.DataFrame({f"{prefix}re": values.real, f"{prefix}im": values.imag})


def dataframe_to_complex(dataframe: pd.DataFrame, prefix: str = "") -> np.ndarray:
    """Inverse of complex_to_dataframe."""
    columns = [f"{prefix}re", f"{prefix}im"]
    missing = [c for c in columns if c not in dataframe.columns]
    if missing:
        raise ValueError(f"The DataFrame must contain the columns {missing}.")
    return dataframe[columns[0]].to_numpy(float) + 1j * dataframe[columns[1]].to_numpy(float)


def load_config(file_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Parse a flat TOML configuration file.

    Parameters:
    - file_path: str, path to the .toml file

    Returns:
    - dict: key/value pairs exactly as written in the file
    """
    path = Path(file_path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML ({exc})") from exc
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"config file {path} must be flat", [f"table '{k}'" for k in nested])
    return data


def parse_scalar(text: str) -> Any:
    """Interpret a command-line override value with TOML scalar/array syntax."""
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def parse_float_list(text: str) -> List[float]:
    """Parse "0,2.5,5" or "0:10:2" (start:stop:step, stop inclusive) into floats."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(part) for part in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(part) for part in text.split(",") if part.strip()]


def measure_time(func, *args, **kwargs):
    """
    Measure the execution time of a function.

    Parameters:
        func (callable): The function to measure.
        *args: Positional arguments to pass to the function.
        **kwargs: Keyword arguments to pass to the function.

    Returns:
        result: The result of the function call.
        execution_time: Time taken to execute the function.
    """
    start_time = time.time()
    result = func(*args, **kwargs)
    end_time = time.time()
    execution_time = end_time - start_time
    return result, execution_time
