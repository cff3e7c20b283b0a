import os

from setuptools import setup, find_packages


from importlib.machinery import SourceFileLoader


module_name = 'xarascan'

try:
    version = SourceFileLoader(
        module_name,
        os.path.join(module_name, 'version.py')
    ).load_module()

    version_info = version.version_info
except FileNotFoundError:
    version_info = (0, 0, 0)


__version__ = '{}.{}.{}'.format(*version_info)


def load_requirements(fname):
    """ load requirements from a pip requirements file """
    with open(fname) as f:
        line_iter = (line.strip() for line in f.readlines())
        return [line for line in line_iter if line and line[0] != '#']


setup(
    name=module_name,
    version=__version__,
    license='MIT',
    description=(
        'xarascan - cross-app resource access (XARA) detection for '
        'Mach-O apps and a simulator of the OS resource registries'
    ),
    long_description=open("README.rst").read(),
    platforms="all",
    classifiers=[
        'Intended Audience :: Developers',
        'Intended Audience :: Information Technology',
        'Operating System :: MacOS',
        'Operating System :: POSIX',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: Implementation :: CPython',
        'Topic :: Security',
        'Topic :: Software Development :: Disassemblers',
    ],
    packages=find_packages(exclude=['tests']),
    package_data={"xarascan": ["py.typed"]},
    install_requires=load_requirements('requirements.txt'),
    python_requires=">=3.8",
    extras_require={
        'develop': load_requirements('requirements.dev.txt'),
    },
    entry_points={
        "console_scripts": ["xarascan = xarascan.cli:main"],
    },
)
