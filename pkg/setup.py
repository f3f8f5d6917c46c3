import os
from setuptools import setup, find_packages

setup(
    name="specroof",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["main"],
    include_package_data=True,
    install_requires=[
        "click",
        "python-dotenv",
        "pydantic>=2",
        "numpy",
    ],
    entry_points={
        "console_scripts": [
            "specroof=main:cli",
        ],
    },
    description="Roofline planning, scaling-law fitting and toy simulation for speculative decoding",
    long_description=open("README.md", encoding="utf-8").read()
    if os.path.exists("README.md")
    else "",
    long_description_content_type="text/markdown",
    classifiers=[],
    python_requires=">=3.10",
)
