"""
rankscale 명령행 도구

[주요 기능]
1. rank      : 임베딩 파일의 RankMe (서브샘플, 안정성 sweep)
2. synth     : 지정 spectrum 의 합성 임베딩 파일 생성
3. fit       : 체크포인트 테이블에 스케일링 법칙 피팅 (rank/data/params/compute/joint)
4. predict   : fit 리포트로 품질 예측 / 목표 품질 역산
5. correlate : 초기 RankMe 와 후기 품질의 PCC, 선택 일치 여부
6. params    : 패밀리 설정의 파라미터 수 추정

stdout 에는 JSON 리포트만, 진단 로그는 stderr 로 출력합니다.
옵션 우선순위: 플래그 > --config JSON > 환경변수 > 기본값
"""
import argparse
import json
import logging
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import LOG_FORMAT, Settings, load_settings
from .errors import (InsufficientDataError, InvalidConfigError, InvalidInputError,
                     RankScaleError)
from .fit import (FitConfig, FitResult, fit_compute_frontier, fit_joint_law,
                  fit_saturating_power_law)
from .laws import (JOINT, SATURATING, JointDataModelLaw, evaluate, evaluate_joint, invert,
                   law_from_dict)
from .rankme import rankme, rankme_from_spectrum, subsample_rows, subsample_stability_sweep
from .registry import (GROUP_BY, ModelConfig, encoder_block_params,
                       estimate_param_count, file_digest, group_by_architecture,
                       group_by_config, latest_per_group, load_checkpoints, read_embeddings,
                       records_table, write_embeddings)
from .reports import (GroupFit, InputDigest, ParamsReport, PredictReport, SynthReport,
                      build_correlate_report, build_fit_report, build_rank_report,
                      load_fitted_law)
from .stats import early_late_correlation, selection_agreement
from .synth import SpectrumSpec, parse_profile, synth_embeddings

logger = logging.getLogger(__name__)

# --law -> 기본 x 컬럼
LAW_COLUMNS = {
    "rank": "rankme",
    "data": "data_hours",
    "params": "param_count",
    "compute": "compute",
}
JOINT_COLUMNS = ("param_count", "data_hours")
LAWS = tuple(LAW_COLUMNS) + ("joint",)

CURVE_POINTS = 200


# ===================================================================
# 설정 해석
# ===================================================================

def _load_config_file(path: Optional[str]) -> Dict[str, object]:
    if not path:
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidConfigError(f"--config JSON 파싱 실패: {path} ({e})") from e
    if not isinstance(payload, dict):
        raise InvalidConfigError(f"--config 파일은 JSON 객체여야 합니다: {path}")
    return {str(k).replace('-', '_'): v for k, v in payload.items()}


def _option(args: argparse.Namespace, name: str, default=None):
    """플래그 > --config > default(환경변수 또는 기본값)"""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if args.file_config.get(name) is not None:
        return args.file_config[name]
    return default


def _typed_option(args: argparse.Namespace, name: str, cast: Callable, default=None):
    """_option 값을 cast 로 변환. 변환 실패는 InvalidConfigError (exit 4)"""
    value = _option(args, name, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise InvalidConfigError(f"--{name.replace('_', '-')} 값이 올바르지 않습니다: {value!r}") from e


def _int_list(values) -> List[int]:
    return [int(v) for v in values]


# ===================================================================
# rank / synth
# ===================================================================

def cmd_rank(args: argparse.Namespace, settings: Settings) -> int:
    samples = _typed_option(args, "samples", int, settings.samples)
    seed = _typed_option(args, "seed", int, settings.seed)
    epsilon = _typed_option(args, "epsilon", float, settings.epsilon)
    sweep_sizes = _typed_option(args, "sweep", _int_list)
    trials = _typed_option(args, "trials", int, 5)

    matrix = read_embeddings(args.path)
    rows = matrix.shape[0]
    digest = InputDigest(path=args.path, rows=rows, sha256=file_digest(args.path))

    warnings = []
    if samples < 2:
        raise InvalidInputError(f"--samples 는 2 이상이어야 합니다: {samples}")
    if samples >= rows:
        if samples > rows:
            logger.warning(f"⚠️ --samples {samples} > 행 수 {rows}: 전체 행을 사용합니다")
            warnings.append("samples_clamped")
        sample = matrix
    else:
        sample = subsample_rows(matrix, samples, seed)
        logger.info(f"✅ {rows}행 중 {samples}행 서브샘플 (seed={seed})")

    score = rankme(sample, epsilon)
    sweep = None
    if sweep_sizes:
        sweep = subsample_stability_sweep(matrix, sweep_sizes, trials,
                                          seed, epsilon)

    report = build_rank_report(score, digest, seed, samples, sweep, warnings)
    print(report.to_json())
    return 0


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    seed = _typed_option(args, "seed", int, settings.seed)
    rows = _typed_option(args, "rows", int, 1000)
    cols = _typed_option(args, "cols", int)
    profile = _option(args, "spec")
    out = _option(args, "out")
    epsilon = _typed_option(args, "epsilon", float, settings.epsilon)
    if not profile or not out:
        raise InvalidInputError("synth 에는 --spec 과 --out 이 필요합니다")

    spec = parse_profile(profile, cols)
    if cols is not None and cols != spec.k:
        if cols < spec.k:
            raise InvalidInputError(f"--cols {cols} 가 spectrum 길이 {spec.k} 보다 작습니다")
        # 나머지 차원은 특이값 0
        spec = SpectrumSpec(spec.values + (0.0,) * (cols - spec.k),
                            spec.profile, spec.parameter)

    matrix = synth_embeddings(spec, rows, seed)
    write_embeddings(out, matrix)
    logger.info(f"✅ 합성 임베딩 저장: {out} ({rows}x{spec.k}, {profile})")

    truth = rankme_from_spectrum(spec.values, epsilon, sample_rows=rows, embed_dim=spec.k)
    report = SynthReport(out=out, profile=profile, spectrum=list(spec.values), rows=rows,
                         cols=spec.k, seed=seed, rankme=truth.value)
    print(report.to_json())
    return 0


# ===================================================================
# fit
# ===================================================================

def _column(df: pd.DataFrame, column: str) -> pd.Series:
    if column not in df.columns or df[column].isna().all():
        raise InsufficientDataError(f"컬럼 '{column}' 에 사용할 수 있는 값이 없습니다")
    return df[column]


def _fit_data(df: pd.DataFrame, x_columns: Sequence[str], q_column: str) -> np.ndarray:
    """(x..., q) 행렬, 값이 빠진 행은 제외"""
    table = pd.concat([_column(df, c) for c in x_columns] + [_column(df, q_column)], axis=1)
    complete = table.dropna()
    if len(complete) < len(table):
        logger.warning(f"⚠️ 값이 빠진 {len(table) - len(complete)}개 행을 제외합니다")
    if complete.empty:
        raise InsufficientDataError(
            f"{list(x_columns)} 와 '{q_column}' 이 모두 있는 행이 없습니다"
        )
    return complete.to_numpy(dtype=np.float64)


def _run_fit(law: str, data: np.ndarray, config: FitConfig) -> FitResult:
    if law == "joint":
        return fit_joint_law(data, config)
    if law == "compute":
        return fit_compute_frontier(data, config)
    return fit_saturating_power_law(data, config, variable=law)


def _negative_prediction(result: FitResult, data: np.ndarray) -> bool:
    """관측 범위 안에서 예측 품질이 음수가 되는지 검사"""
    theta = np.asarray(result.params)
    if result.family == JOINT.name:
        n, d = np.meshgrid(np.unique(data[:, 0]), np.unique(data[:, 1]))
        predicted = JOINT.predict(theta, np.column_stack([n.ravel(), d.ravel()]))
    else:
        x = data[:, 0]
        grid = np.concatenate([np.geomspace(x.min(), x.max(), CURVE_POINTS), x])
        predicted = SATURATING.predict(theta, grid)
    return bool(np.any(predicted < 0))


def _write_plot_csv(path: str, result: FitResult) -> None:
    """점 테이블 (x, observed, predicted, residual) + 곡선 (curve_x, curve_q)"""
    inputs = np.asarray(result.inputs)
    if result.family == JOINT.name:
        points = pd.DataFrame({'n': inputs[:, 0], 'd': inputs[:, 1]})
        curve = pd.DataFrame()
    else:
        points = pd.DataFrame({'x': inputs[:, 0]})
        curve_x = np.geomspace(inputs[:, 0].min(), inputs[:, 0].max(), CURVE_POINTS)
        curve = pd.DataFrame({
            'curve_x': curve_x,
            'curve_q': SATURATING.predict(np.asarray(result.params), curve_x),
        })
    points['observed'] = result.observed
    points['predicted'] = result.predicted
    points['residual'] = result.residuals
    table = pd.concat([points, curve], axis=1)
    table.to_csv(path, index=False, encoding='utf-8', float_format='%.17g')
    logger.info(f"✅ plot 데이터 저장: {path}")


def _groups_of(records, group_by: str):
    """(GroupFit 식별 필드, 레코드) 목록"""
    if group_by == "architecture":
        return [
            (dict(group_by=group_by, name=name, configs=len({r.config for r in group})),
             group)
            for name, group in group_by_architecture(records).items()
        ]
    return [
        (dict(group_by=group_by, name=key.name, mask_rate=key.mask_rate,
              data_hours=key.data_hours), group)
        for key, group in group_by_config(records).items()
    ]


def _group_fits(records, law: str, x_columns: Sequence[str], q_column: str,
                config: FitConfig, tokens: int, group_by: str = "config") -> List[GroupFit]:
    """그룹별 피팅 (파라미터 수보다 포인트가 적은 그룹은 건너뜀)"""
    family = JOINT if law == "joint" else SATURATING
    groups = []
    for ident, group in _groups_of(records, group_by):
        df = records_table(group, tokens)
        try:
            data = _fit_data(df, x_columns, q_column)
        except InsufficientDataError:
            continue
        if data.shape[0] < family.n_params:
            logger.info(f"그룹 {ident['name']}: 포인트 {data.shape[0]}개 -> 건너뜀")
            continue
        result = _run_fit(law, data, config)
        groups.append(GroupFit(
            **ident,
            points=data.shape[0],
            parameters=result.parameters,
            rss=result.rss,
            r_squared=result.r_squared,
            converged=result.converged,
            warnings=result.warnings,
        ))
    logger.info(f"✅ {group_by} 그룹 피팅 {len(groups)}개")
    return groups


def cmd_fit(args: argparse.Namespace, settings: Settings) -> int:
    law = _option(args, "law", "rank")
    if law not in LAWS:
        raise InvalidConfigError(f"알 수 없는 --law: {law} (가능: {', '.join(LAWS)})")
    group_by = _option(args, "group_by")
    if group_by is not None and group_by not in GROUP_BY:
        raise InvalidConfigError(f"알 수 없는 --group-by: {group_by} (가능: {', '.join(GROUP_BY)})")
    q_column = _option(args, "q_column", "quality")
    tokens = _typed_option(args, "tokens_per_sample", int, settings.tokens_per_sample)
    config = FitConfig(
        max_iterations=_typed_option(args, "max_iterations", int, settings.max_iterations),
        multi_start=_typed_option(args, "multi_start", int, settings.multi_start),
        seed=_typed_option(args, "seed", int, settings.seed),
    )

    records = load_checkpoints(args.path)
    digest = InputDigest(path=args.path, rows=len(records), sha256=file_digest(args.path))
    if _option(args, "converged_only", False):
        records = latest_per_group(records)
        logger.info(f"✅ 그룹별 최종 체크포인트 {len(records)}개 사용")

    if law == "joint":
        x_column = None
        x_columns = JOINT_COLUMNS
    else:
        x_column = _option(args, "x_column", LAW_COLUMNS[law])
        x_columns = (x_column,)

    data = _fit_data(records_table(records, tokens), x_columns, q_column)
    result = _run_fit(law, data, config)

    extra = []
    if _negative_prediction(result, data):
        logger.warning("⚠️ 관측 범위 안에서 예측 품질이 음수가 됩니다")
        extra.append("negative_prediction_range")

    groups = None
    if group_by or _option(args, "per_group", False):
        groups = _group_fits(records, law, x_columns, q_column, config, tokens,
                             group_by or "config")

    plot_csv = _option(args, "plot_csv")
    if plot_csv:
        _write_plot_csv(plot_csv, result)

    report = build_fit_report(result, digest, law, q_column, x_column, extra, groups)
    print(report.to_json())
    return 0


# ===================================================================
# predict / correlate / params
# ===================================================================

def _parse_point(text: str, joint: bool):
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError as e:
        raise InvalidInputError(f"--at 값 파싱 실패: {text}") from e
    if len(values) != (2 if joint else 1):
        expected = "n,d" if joint else "x"
        raise InvalidInputError(f"--at 형식은 '{expected}' 이어야 합니다: {text}")
    return values


def cmd_predict(args: argparse.Namespace, settings: Settings) -> int:
    fitted = load_fitted_law(args.model)
    law = law_from_dict(fitted.family, fitted.parameters, fitted.variable or "rank")
    joint = isinstance(law, JointDataModelLaw)

    if args.at is not None:
        at = _parse_point(args.at, joint)
        value = evaluate_joint(law, *at) if joint else evaluate(law, at[0])
        report = PredictReport(family=fitted.family, variable=fitted.variable,
                               parameters=fitted.parameters, mode="at", at=at,
                               value=value, reachable=True)
    else:
        if joint:
            raise InvalidInputError("결합 법칙은 --target 역산을 지원하지 않습니다")
        target = float(args.target)
        value = invert(law, target)
        report = PredictReport(family=fitted.family, variable=fitted.variable,
                               parameters=fitted.parameters, mode="target",
                               target=target, value=value, reachable=True)

    print(report.to_json())
    return 0


def cmd_correlate(args: argparse.Namespace, settings: Settings) -> int:
    early = _typed_option(args, "early_step", int)
    late = _typed_option(args, "late_step", int)
    if early is None or late is None:
        raise InvalidInputError("correlate 에는 --early-step 과 --late-step 이 필요합니다")

    records = load_checkpoints(args.path)
    correlation = early_late_correlation(records, early, late)
    agreement = selection_agreement(records, early, late)
    print(build_correlate_report(correlation, agreement, len(records)).to_json())
    return 0


def cmd_params(args: argparse.Namespace, settings: Settings) -> int:
    config = ModelConfig.for_family(int(args.depth), int(args.embed))
    count = estimate_param_count(config)
    report = ParamsReport(
        name=config.family_name,
        depth=config.encoder_depth,
        embed=config.embed_dim,
        mlp=config.mlp_dim,
        heads=config.num_heads,
        block_params=encoder_block_params(config.embed_dim),
        param_count=count,
        param_count_millions=round(count / 1e6, 2),
    )
    print(report.to_json())
    return 0


# ===================================================================
# 파서 / 진입점
# ===================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankscale",
        description="임베딩 effective rank (RankMe) 계산과 스케일링 법칙 피팅 도구",
    )
    parser.add_argument("--config", help="옵션 기본값 JSON 파일 (키는 플래그 이름, '-' -> '_')")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="임베딩 파일의 RankMe")
    p.add_argument("path", help="임베딩 파일 (EMBR 바이너리 또는 .csv)")
    p.add_argument("--samples", type=int, help="서브샘플 행 수 (기본 30000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float, help="확률 평활화 epsilon (기본 1e-7)")
    p.add_argument("--sweep", type=int, nargs="+", help="안정성 sweep 서브샘플 크기들")
    p.add_argument("--trials", type=int, help="sweep 크기별 반복 수 (기본 5)")
    p.set_defaults(handler=cmd_rank)

    p = sub.add_parser("synth", help="합성 임베딩 파일 생성")
    p.add_argument("--spec", help="uniform:K | geometric:R:K | power:P:K | explicit:v1,v2,..")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out", help="출력 경로 (.csv 면 CSV)")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("fit", help="체크포인트 테이블에 스케일링 법칙 피팅")
    p.add_argument("path", help="체크포인트 CSV/JSON")
    p.add_argument("--law", choices=LAWS)
    p.add_argument("--x-column", dest="x_column")
    p.add_argument("--q-column", dest="q_column")
    p.add_argument("--tokens-per-sample", dest="tokens_per_sample", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--multi-start", dest="multi_start", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--converged-only", dest="converged_only", action="store_true", default=None,
                   help="설정 그룹별 마지막 체크포인트만 사용")
    p.add_argument("--per-group", dest="per_group", action="store_true", default=None,
                   help="설정 그룹별 개별 피팅 결과 추가")
    p.add_argument("--group-by", dest="group_by", choices=GROUP_BY,
                   help="그룹 기준 (config: 설정/mask/데이터, architecture: 아키텍처별). --per-group 포함")
    p.add_argument("--plot-csv", dest="plot_csv", help="plot 데이터 CSV 경로")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("predict", help="fit 리포트로 예측 / 역산")
    p.add_argument("--model", required=True, help="fit 리포트 JSON")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--at", help="x (결합 법칙은 'n,d')")
    target.add_argument("--target", type=float, help="목표 품질")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("correlate", help="초기 RankMe 와 후기 품질 상관")
    p.add_argument("path", help="체크포인트 CSV/JSON")
    p.add_argument("--early-step", dest="early_step", type=int)
    p.add_argument("--late-step", dest="late_step", type=int)
    p.set_defaults(handler=cmd_correlate)

    p = sub.add_parser("params", help="패밀리 설정 파라미터 수 추정")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--embed", type=int, required=True)
    p.set_defaults(handler=cmd_params)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = load_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.file_config = _load_config_file(args.config)
        return args.handler(args, settings)
    except RankScaleError as e:
        logger.error(f"❌ {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"❌ 파일 I/O 오류: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
