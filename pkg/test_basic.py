"""
Basic tests to verify project structure, sample configurations and dependencies.
No forward solves are run here.
"""

import glob
import json
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, ROOT)

from src.config import RunConfig


def test_project_structure():
    """All required directories and files exist."""
    required_dirs = ["app", "app/input", "app/output", "src"]
    required_files = [
        "requirements.txt",
        "README.md",
        "DESIGN.md",
        "src/__init__.py",
        "src/main.py",
        "src/cli.py",
        "src/config.py",
        "src/errors.py",
        "src/specfun.py",
        "src/geometry.py",
        "src/forward.py",
        "src/oracle.py",
        "src/spectral.py",
        "src/reconstruct.py",
        "src/utils.py",
    ]
    for dir_path in required_dirs:
        assert os.path.isdir(os.path.join(ROOT, dir_path)), f"Missing directory: {dir_path}"
    for file_path in required_files:
        assert os.path.isfile(os.path.join(ROOT, file_path)), f"Missing file: {file_path}"


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(ROOT, "app", "input", "*.json"))))
def test_sample_configs_validate(path):
    """Every shipped run configuration loads and builds its medium."""
    config = RunConfig.from_file(path)
    medium = config.build_medium()
    assert medium.n != 1
    assert config.output_dir.startswith("app/output")


def test_sample_configs_present():
    names = {os.path.basename(p) for p in glob.glob(os.path.join(ROOT, "app", "input", "*.json"))}
    assert {"square.json", "hexagon.json", "heart.json", "rain_small.json",
            "rain_regular.json"} <= names


def test_package_exports():
    import src
    assert src.__version__
    for name in src.__all__:
        assert hasattr(src, name), f"src does not export {name}"


def test_requirements_file():
    """requirements.txt lists the numerical and logging stack."""
    with open(os.path.join(ROOT, "requirements.txt"), encoding="utf-8") as f:
        content = f.read()
    for package in ("numpy", "scipy", "scikit-learn", "joblib", "python-json-logger", "pytest"):
        assert package in content, f"Requirements missing: {package}"


def test_readme_sections():
    with open(os.path.join(ROOT, "README.md"), encoding="utf-8") as f:
        content = f.read()
    for section in ("## Installation", "## Usage", "## Architecture", "## Output Format"):
        assert section in content, f"README missing section: {section}"


def test_sample_output_format_documented():
    """The README example of cusp_report.json parses as JSON."""
    with open(os.path.join(ROOT, "README.md"), encoding="utf-8") as f:
        content = f.read()
    start = content.index("```json", content.index("## Output Format")) + len("```json")
    end = content.index("```", start)
    report = json.loads(content[start:end])
    assert {"k", "mode", "vanishing", "localizing", "polygon", "corner_errors"} <= set(report)
