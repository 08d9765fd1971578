from setuptools import setup, find_packages

setup(name='rangeflow',
      version='0.1',
      packages=find_packages(exclude=['tests']),
      install_requires=['numpy>=1.17',
                        'scipy>=1.4',
                        'click>=8.0',
                        'tqdm>=4.40'],
      extras_require={'test': ['pytest>=6.0']},
      entry_points={'console_scripts': ['rangeflow=rangeflow.run_flow:main']}
)
