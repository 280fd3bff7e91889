import os
from setuptools import setup

def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()

REQUIRES = ["numpy", "scipy", "PyYAML"]

setup(
    name = "pawcap",
    version = "0.1.0",
    author = "The pawcap developers",
    description = ("Stereo motion capture and gesture recognition driving"
                   " a cat avatar"),
    license = "Apache 2.0",
    keywords = ["Python", "motion capture", "stereo vision", "gestures",
                "animation"],
    packages=['pawcap', 'pawcap.geometry', 'pawcap.body',
              'pawcap.behaviour', 'pawcap.avatar', 'pawcap.oracle',
              'pawcap.pipeline'],
    package_data={'pawcap': ['data/*.json']},
    include_package_data=True,
    install_requires=REQUIRES,
    entry_points={
        'console_scripts': ['pawcap = pawcap.pipeline.cli:main'],
    },
    long_description=read('README.md'),
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python',
        'Topic :: Multimedia :: Graphics :: 3D Modeling',
    ],
)
