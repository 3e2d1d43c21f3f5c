#!/usr/bin/env python3
"""
검증 배터리 직접 실행 스크립트
서버 없이 모든 정확한 검사를 실행하고 요약을 출력합니다.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'backend'))

from core.log_config import setup_logging
from core.settings import get_settings
from core.validation import OracleBattery


def main():
    parser = argparse.ArgumentParser(description="Run the energy-lab oracle battery")
    parser.add_argument("--max-k", type=int, default=6)
    parser.add_argument("--with-mc", action="store_true", help="also run the Monte Carlo asymptotic checks")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", help="write every check to this CSV file")
    args = parser.parse_args()

    settings = get_settings()
    setup_logging(settings.log_level, settings.log_json)

    print("=" * 60)
    print("🚀 검증 배터리 시작")
    print("=" * 60)

    battery = OracleBattery(max_k=args.max_k, include_mc=args.with_mc, seed=args.seed,
                            threads=settings.threads)
    results = battery.run()

    if results is None:
        print("\n❌ 검증 실행 실패")
        return 1

    if args.csv:
        battery.to_dataframe().to_csv(args.csv, index=False)
        print(f"\n📄 결과 저장: {args.csv}")

    print("\n" + "=" * 60)
    if results["failed"] == 0:
        print(f"✅ 전체 통과 ({results['total_checks']}개 검사, {results['wall_time']}초)")
        return 0
    print(f"❌ 실패 {results['failed']} / {results['total_checks']}")
    for failure in results["failures"][:20]:
        print(f"   - {failure['name']} [{failure['subject']}]: expected {failure['expected']}, got {failure['actual']}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
