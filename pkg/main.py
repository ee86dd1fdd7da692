"""
主程序入口
功能：simulate / train / denoise / evaluate / report / ablate / make-cube 子命令
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.ablation import DEFAULT_K_VALUES, STUDIES, AblationRunner, parse_k_values
from core.checkpoint import load_checkpoint
from core.cube_io import load_cube, save_cube
from core.exceptions import (
    CheckpointError, CubeFormatError, ModelConfigError, NoiseSpecError,
    NumericFailureError, RunConfigError, SMCNNError, TrainingError
)
from core.metrics import report as metric_report
from core.noise_lab import NoiseLab
from core.sm_cnn import SMCNN, count_params
from core.synthetic import make_synthetic_cube
from core.trainer import Trainer, denoise_cube
from models.model_config import ModelConfig, Variant
from models.run_config import RunConfig
from utils.device_utils import get_cpu_info, get_memory_info, resolve_thread_count
from utils.file_utils import ensure_dir
from utils.format_utils import format_number, format_size
from utils.logger import get_logger, setup_logger
import config

logger = get_logger(__name__)

TRAIN_LOG_NAME = "train_log.csv"
METRICS_NAME = "metrics.csv"
SUMMARY_NAME = "summary.csv"
ABLATION_NAME = "ablation.csv"


def exit_code_for(error: BaseException) -> int:
    """异常类别 → 退出码"""
    if isinstance(error, (RunConfigError, ModelConfigError, NoiseSpecError)):
        return config.EXIT_CONFIG_ERROR
    if isinstance(error, (CubeFormatError, CheckpointError, OSError)):
        return config.EXIT_IO_ERROR
    if isinstance(error, NumericFailureError):
        return config.EXIT_NUMERIC_ERROR
    return config.EXIT_GENERIC_ERROR


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """解析 --set key=value"""
    overrides: Dict[str, str] = {}
    for pair in pairs or []:
        if '=' not in pair:
            raise RunConfigError(f"--set 参数格式应为 key=value, 当前 {pair!r}")
        key, value = (part.strip() for part in pair.split('=', 1))
        overrides[key] = value
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """配置档 < 配置文件 < --set < 专用参数"""
    overrides: Dict[str, Any] = parse_overrides(args.set)
    flags = {
        'variant': args.variant,
        'skip_taps': args.skip_taps,
        'K': args.K,
        'C': args.C,
        'seed': args.seed,
        'threads': args.threads,
        'case': args.case,
    }
    for key in ('input', 'output', 'clean', 'checkpoint', 'output_dir'):
        flags[key] = getattr(args, key, None)
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.resolve(profile=args.profile, config_path=args.config, overrides=overrides)


def _sub_configs(run: RunConfig):
    """构建三个子配置；训练配置非法属于配置错误"""
    try:
        return run.noise_spec(), run.model_config(), run.train_config()
    except TrainingError as e:
        raise RunConfigError(f"训练配置非法: {e}")


def _output_dir_of(path: str) -> Path:
    return Path(path).resolve().parent


# ==================== 子命令 ====================

def cmd_simulate(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('input', 'output')
    spec, _, _ = _sub_configs(run)

    clean = load_cube(run['input'])
    noisy, log = NoiseLab(spec).corrupt(clean)

    output = Path(run['output'])
    save_cube(noisy, output)
    log_path = output.with_suffix('.noise.txt')
    log.save(log_path)
    run.save_resolved(_output_dir_of(run['output']))

    print(f"case: {log.case.value}, seed: {log.seed}, bands: {log.bands}")
    for kind, count in log.summary().items():
        print(f"  {kind:<9} {count} bands")
    print(f"noisy cube: {output}")
    print(f"noise log:  {log_path}")
    return config.EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('output_dir')
    spec, model_config, train_config = _sub_configs(run)

    output_dir = ensure_dir(run['output_dir'])
    train_config.checkpoint_dir = str(output_dir)

    if run.get('input'):
        clean = load_cube(run['input'])
    else:
        logger.warning("未指定 --input, 使用 32×32×16 合成立方体训练")
        clean = make_synthetic_cube(32, 32, 16, seed=run['seed'])

    noisy, noise_log = NoiseLab(spec).corrupt(clean)
    save_cube(noisy, output_dir / "noisy.hcube")
    noise_log.save(output_dir / "noisy.noise.txt")

    trainer = Trainer(model_config, train_config, spec, show_progress=not args.quiet)
    model, train_log = trainer.train(clean, noisy)
    train_log.save_csv(output_dir / TRAIN_LOG_NAME)
    run.save_resolved(output_dir)

    summary = train_log.to_dict()
    print(f"steps: {summary['steps']}, initial loss: {summary['initial_loss']:.6f}, "
          f"final loss: {summary['final_loss']:.6f}")
    print(f"best epoch: {summary['best_epoch']}, best val MPSNR: {summary['best_mpsnr']:.4f}")
    print(f"checkpoints: {output_dir}")
    return config.EXIT_OK


def cmd_denoise(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('checkpoint', 'input', 'output')

    model = load_checkpoint(run['checkpoint'])
    noisy = load_cube(run['input'])
    denoised = denoise_cube(model, noisy, threads=run['threads'], show_progress=not args.quiet)
    save_cube(denoised, run['output'])
    run.save_resolved(_output_dir_of(run['output']))

    print(f"denoised cube: {run['output']} ({denoised.rows}×{denoised.cols}×{denoised.bands})")
    return config.EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('input', 'clean', 'output_dir')

    estimate = load_cube(run['input'])
    clean = load_cube(run['clean'])
    result = metric_report(estimate, clean)

    output_dir = ensure_dir(run['output_dir'])
    result.save_csv(output_dir / METRICS_NAME)
    result.save_summary(output_dir / SUMMARY_NAME)
    run.save_resolved(output_dir)

    print(result.summary_line())
    return config.EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    if run.get('checkpoint'):
        model = load_checkpoint(run['checkpoint'])
    else:
        _, model_config, _ = _sub_configs(run)
        model = SMCNN.build(model_config, run['init_seed'])

    print(model.summary_text())
    print("")
    print("variants at this configuration:")
    base = model.config.to_dict()
    for variant in Variant:
        counted = count_params(ModelConfig.from_dict(dict(base, variant=variant)))
        print(f"  {variant.value:<10} {format_number(counted)}")

    if run.get('output_dir'):
        run.save_resolved(ensure_dir(run['output_dir']))
    return config.EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('output_dir')
    spec, model_config, train_config = _sub_configs(run)
    studies = STUDIES if args.study == 'all' else (args.study,)
    k_values = parse_k_values(args.k_values)

    if run.get('input'):
        clean = load_cube(run['input'])
    else:
        logger.warning("未指定 --input, 使用 32×32×16 合成立方体做消融实验")
        clean = make_synthetic_cube(32, 32, 16, seed=run['seed'])

    output_dir = ensure_dir(run['output_dir'])
    runner = AblationRunner(model_config, train_config, spec, k_values=k_values,
                            threads=run['threads'], checkpoint_root=str(output_dir / "checkpoints"),
                            show_progress=not args.quiet)
    result = runner.run(clean, studies)
    result.save_csv(output_dir / ABLATION_NAME)
    run.save_resolved(output_dir)

    frame = result.to_frame()
    print(frame[['study', 'setting', 'params', 'mpsnr', 'mssim', 'sam']].to_string(index=False))
    print(f"ablation table: {output_dir / ABLATION_NAME}")
    return config.EXIT_OK


def cmd_make_cube(args: argparse.Namespace) -> int:
    run = resolve_config(args)
    run.require('output')
    cube = make_synthetic_cube(args.rows, args.cols, args.bands,
                               n_endmembers=args.endmembers, seed=run['seed'])
    save_cube(cube, run['output'])
    run.save_resolved(_output_dir_of(run['output']))
    print(f"synthetic cube: {run['output']} ({cube.rows}×{cube.cols}×{cube.bands})")
    return config.EXIT_OK


# ==================== 参数解析 ====================

def _add_common(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("配置")
    group.add_argument('--profile', choices=sorted(config.PROFILES), default=None,
                       help=f"配置档（默认 {config.DEFAULT_PROFILE}）")
    group.add_argument('--config', default=None, help="key = value 配置文件")
    group.add_argument('--set', action='append', metavar='KEY=VALUE',
                       help="覆盖任意配置项，可重复")
    group.add_argument('--variant', default=None, help="smcnn / wmcnn / smcnnlite")
    group.add_argument('--skip-taps', dest='skip_taps', type=int, default=None)
    group.add_argument('--K', dest='K', type=int, default=None, help="相邻波段数（偶数）")
    group.add_argument('--C', dest='C', type=int, default=None, help="深层特征通道数")
    group.add_argument('--seed', type=int, default=None)
    group.add_argument('--threads', type=int, default=None, help="工作线程上限（0 为自动）")
    group.add_argument('--case', default=None, help="噪声场景 case1 ~ case5")
    group.add_argument('--log-level', dest='log_level', default=None,
                       choices=['TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR'])
    group.add_argument('--quiet', action='store_true', help="只输出警告以上日志, 不显示进度条")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='smcnn',
        description=f"{config.APP_NAME} v{config.APP_VERSION}",
    )
    parser.add_argument('--version', action='version', version=config.APP_VERSION)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help="按噪声场景生成含噪立方体")
    p.add_argument('--input', required=True, help="干净立方体 .hcube")
    p.add_argument('--output', required=True, help="含噪立方体输出路径")
    _add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('train', help="训练去噪网络")
    p.add_argument('--input', default=None, help="干净立方体 .hcube（缺省使用合成立方体）")
    p.add_argument('--output-dir', dest='output_dir', required=True, help="检查点与日志目录")
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('denoise', help="用检查点去噪整个立方体")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--input', required=True, help="含噪立方体 .hcube")
    p.add_argument('--output', required=True, help="去噪结果输出路径")
    _add_common(p)
    p.set_defaults(handler=cmd_denoise)

    p = sub.add_parser('evaluate', help="计算 MPSNR / MSSIM / SAM")
    p.add_argument('--input', required=True, help="待评价立方体")
    p.add_argument('--clean', required=True, help="干净参考立方体")
    p.add_argument('--output-dir', dest='output_dir', required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser('report', help="参数量与结构报告")
    p.add_argument('--checkpoint', default=None, help="检查点（缺省按配置构建）")
    p.add_argument('--output-dir', dest='output_dir', default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser('ablate', help="K / 跳连接数 / 变体消融实验")
    p.add_argument('--input', default=None, help="干净立方体 .hcube（缺省使用合成立方体）")
    p.add_argument('--output-dir', dest='output_dir', required=True, help="结果表与检查点目录")
    p.add_argument('--study', choices=STUDIES + ('all',), default='all')
    p.add_argument('--k-values', dest='k_values', default=','.join(str(k) for k in DEFAULT_K_VALUES),
                   help="K 研究的取值，逗号分隔")
    _add_common(p)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser('make-cube', help="生成合成端元混合立方体")
    p.add_argument('--output', required=True)
    p.add_argument('--rows', type=int, default=32)
    p.add_argument('--cols', type=int, default=32)
    p.add_argument('--bands', type=int, default=16)
    p.add_argument('--endmembers', type=int, default=4)
    _add_common(p)
    p.set_defaults(handler=cmd_make_cube)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = 'WARNING' if args.quiet else args.log_level
    if level:
        setup_logger(level=level)

    logger.info(f"{config.APP_NAME} v{config.APP_VERSION}: {args.command}")
    memory = get_memory_info()
    logger.debug(
        f"CPU: {get_cpu_info()}, 默认线程数 {resolve_thread_count(0)}, "
        f"可用内存 {format_size(memory['available'])}"
    )

    try:
        return args.handler(args)
    except (SMCNNError, OSError) as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} 失败 ({type(e).__name__}): {e}")
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
