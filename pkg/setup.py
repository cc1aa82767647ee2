import pathlib
import sys
import os
from setuptools import setup

# The directory containing this file
HERE = pathlib.Path(__file__).parent

# The text of the README file
README = (HERE / "README.md").read_text()

PKG = "pyEvade"

# 'setup.py publish' shortcut.
if sys.argv[-1] == 'publish':
    os.system('python -m build')
    os.system('twine upload dist/*')
    sys.exit()


# This call to setup() does all the work
setup(
    name=PKG,
    version="1.0.0",
    description="Adversarial evasion attacks and defenses for static-feature Android malware classifiers",
    long_description=README,
    long_description_content_type="text/markdown",
    author="pyEvade developers",
    license="Apache License 2.0",
    packages=["pyEvade"],
    python_requires=">=3.10",
    classifiers=[
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: 3.13',
        "Operating System :: OS Independent",
        "Topic :: Security",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    keywords='adversarial machine-learning malware android evasion',
    install_requires=["numpy>=1.24", "scikit-learn>=1.2", "tqdm"],
    extras_require={"test": ["pytest"], "docs": ["sphinx", "sphinx_rtd_theme"]},
    entry_points={"console_scripts": ["evade=pyEvade.cli:main"]},
)
