#!/usr/bin/env python3
"""
energy-lab CLI 실행 스크립트
backend/ 를 경로에 추가한 뒤 cli.main 으로 위임합니다.

    python run_cli.py group-info --group gl2:3
    python run_cli.py exact-expectation --group sym:3 --k 2 --variant AA
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'backend'))

from cli import main

if __name__ == "__main__":
    sys.exit(main())
