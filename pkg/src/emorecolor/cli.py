"""Batch operator CLI: ingest databases, run transforms, compare feature
layers.

Exit codes: 0 success, 2 input/validation failure, 3 pipeline failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import datastore, features, pipeline
from .color import Binning
from .emotion import CHANNELS, EmotionDistribution
from .errors import EmorecolorError, ManifestParseError
from .transfer import TransferParams

EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


def parse_emotion(text: str) -> EmotionDistribution:
    """Parse 'joy' (one-hot) or 'anger=0.5,sadness=0.3,fear=0.2'."""
    text = text.strip()
    if "=" not in text:
        if text not in CHANNELS:
            raise click.BadParameter(f"unknown emotion {text!r}; choose from {CHANNELS}")
        return EmotionDistribution.one_hot(text)
    weights: dict[str, float] = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        name, _, value = piece.partition("=")
        name = name.strip()
        if name not in CHANNELS:
            raise click.BadParameter(f"unknown emotion {name!r}; choose from {CHANNELS}")
        try:
            weights[name] = float(value)
        except ValueError:
            raise click.BadParameter(f"bad value for {name!r}: {value!r}") from None
    try:
        return EmotionDistribution.from_mapping(weights)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _load_image(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _db_options(fn):
    fn = click.option(
        "--db", "db_path", envvar="EMORECOLOR_DB", required=True,
        help="Manifest path of an ingested database (env: EMORECOLOR_DB).",
    )(fn)
    fn = click.option("--image-root", default=None, help="Image root; defaults to the manifest directory.")(fn)
    fn = click.option("--features", "signature", default="fallback:g4", show_default=True,
                      help="Feature signature, e.g. fallback:g4 or backend:layer+backend:layer.")(fn)
    fn = click.option("--bins", default=256, show_default=True, help="Histogram bins per channel.")(fn)
    return fn


@click.group()
def main():
    """Emotion-guided image recoloring."""


@main.command("ingest")
@click.argument("manifest", type=click.Path())
@click.option("--image-root", default=None)
@click.option("--features", "signature", default="fallback:g4", show_default=True)
@click.option("--bins", default=256, show_default=True)
def cmd_ingest(manifest, image_root, signature, bins):
    """Validate a manifest and precompute feature/histogram sidecars."""
    try:
        report = datastore.ingest(
            manifest, image_root,
            signature=features.parse_signature(signature),
            binning=Binning(bins),
        )
    except (ManifestParseError, EmorecolorError, OSError) as exc:
        click.echo(f"ingest failed: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(f"accepted:  {report.accepted}")
    click.echo(f"extracted: {report.extracted}")
    click.echo(f"reused:    {report.reused}")
    click.echo(f"rejected:  {len(report.rejected)}")
    for image_id, reason in report.rejected:
        click.echo(f"  {image_id}: {reason}")
    click.echo(f"digest:    {report.digest}")
    if report.accepted < 1:
        sys.exit(EXIT_VALIDATION)


@main.command("transform")
@click.argument("source", type=click.Path(exists=True))
@_db_options
@click.option("--emotion", "emotion_text", required=True,
              help="Target emotion: a name (one-hot) or name=value pairs.")
@click.option("-o", "--output", required=True, type=click.Path(), help="Output PNG path.")
@click.option("--k", default=10, show_default=True)
@click.option("--omega-mult", default=1.5, show_default=True)
@click.option("--strength", default=1.0, show_default=True)
@click.option("--passes", default=0, show_default=True)
def cmd_transform(source, db_path, image_root, signature, bins, emotion_text,
                  output, k, omega_mult, strength, passes):
    """Recolor SOURCE toward the target emotion; writes <output> and
    <output>.plan.json."""
    try:
        target = parse_emotion(emotion_text)
        binning = Binning(bins)
        db = datastore.load(db_path, image_root,
                            signature=features.parse_signature(signature), binning=binning)
        params = pipeline.PipelineParams(
            k=k, omega_multiplier=omega_mult,
            transfer=TransferParams(strength=strength, smoothing_passes=passes, binning=binning),
        )
        pixels = _load_image(source)
    except click.BadParameter as exc:
        click.echo(f"invalid input: {exc.message}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (EmorecolorError, ValueError, OSError) as exc:
        click.echo(f"invalid input: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)

    try:
        result = pipeline.transform(pixels, target, db, params, source_id=Path(source).name)
    except EmorecolorError as exc:
        click.echo(f"transform failed: {exc}", err=True)
        sys.exit(EXIT_PIPELINE)

    Image.fromarray(result.output).save(output, format="PNG")
    plan_path = Path(str(output) + ".plan.json")
    plan_path.write_text(result.plan.to_canonical_json() + "\n", encoding="utf-8")

    click.echo(_plan_table(result.plan))
    click.echo(f"wrote {output} and {plan_path}")


def _plan_table(plan: pipeline.TransferPlan) -> str:
    lines = [f"{'id':<16} {'bc':>10} {'distance':>12} {'weight':>10}"]
    for t in plan.targets:
        lines.append(
            f"{t['id']:<16} {t['bc']:>10.6f} {t['distance']:>12.6f} {t['weight']:>10.6f}"
        )
    return "\n".join(lines)


@main.command("ablate")
@click.argument("sources", nargs=-1, required=True, type=click.Path(exists=True))
@_db_options
@click.option("--emotion", "emotion_text", required=True)
@click.option("--signatures", "signatures", multiple=True, required=True,
              help="Feature signatures to compare (repeatable).")
@click.option("-o", "--output-dir", required=True, type=click.Path())
@click.option("--k", default=10, show_default=True)
@click.option("--omega-mult", default=1.5, show_default=True)
def cmd_ablate(sources, db_path, image_root, signature, bins, emotion_text,
               signatures, output_dir, k, omega_mult):
    """Compare target selection across feature signatures; emits one plan
    per (source, signature) and a comparison table."""
    try:
        target = parse_emotion(emotion_text)
        binning = Binning(bins)
        databases = {}
        for sig_text in signatures:
            sig = features.parse_signature(sig_text)
            try:
                databases[sig_text] = datastore.load(db_path, image_root,
                                                     signature=sig, binning=binning)
            except EmorecolorError as exc:
                click.echo(f"signature {sig_text!r}: {exc}", err=True)
                sys.exit(EXIT_VALIDATION)
    except click.BadParameter as exc:
        click.echo(f"invalid input: {exc.message}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (EmorecolorError, ValueError, OSError) as exc:
        click.echo(f"invalid input: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params_by_sig = {
        s: pipeline.PipelineParams(k=k, omega_multiplier=omega_mult,
                                   transfer=TransferParams(binning=binning))
        for s in signatures
    }

    rows = []
    for src in sources:
        pixels = _load_image(src)
        name = Path(src).name
        for sig_text in signatures:
            try:
                plan = pipeline.preview_targets(
                    pixels, target, databases[sig_text], params_by_sig[sig_text],
                    source_id=name,
                )
            except EmorecolorError as exc:
                click.echo(f"ablate failed on {name} / {sig_text}: {exc}", err=True)
                sys.exit(EXIT_PIPELINE)
            safe_sig = sig_text.replace(":", "-").replace("+", "_")
            plan_path = out_dir / f"{name}__{safe_sig}.plan.json"
            plan_path.write_text(plan.to_canonical_json() + "\n", encoding="utf-8")
            mean_dist = sum(t["distance"] for t in plan.targets) / len(plan.targets)
            rows.append((name, sig_text, len(plan.targets), mean_dist,
                         ",".join(t["id"] for t in plan.targets[:5])))

    lines = [f"{'source':<20} {'signature':<20} {'k':>3} {'mean_dist':>12}  top_targets"]
    for name, sig_text, kk, mean_dist, top in rows:
        lines.append(f"{name:<20} {sig_text:<20} {kk:>3} {mean_dist:>12.6f}  {top}")
    table = "\n".join(lines)
    click.echo(table)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")


@main.command("stats")
@_db_options
def cmd_stats(db_path, image_root, signature, bins):
    """Print record count, signature, binning, and database digest."""
    try:
        db = datastore.load(db_path, image_root,
                            signature=features.parse_signature(signature),
                            binning=Binning(bins))
    except (EmorecolorError, OSError) as exc:
        click.echo(f"stats failed: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps({
        "records": len(db),
        "feature_signature": features.signature_string(db.signature),
        "bins": db.binning.bins,
        "digest": db.digest,
    }, indent=2, sort_keys=True))


@main.command("serve")
@_db_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8750, show_default=True)
@click.option("--cors-origin", default=None, help="Allowed UI origin for CORS.")
def cmd_serve(db_path, image_root, signature, bins, host, port, cors_origin):
    """Run the HTTP service over an ingested database."""
    import uvicorn  # noqa: PLC0415

    from .service import create_app  # noqa: PLC0415

    db = datastore.load(db_path, image_root,
                        signature=features.parse_signature(signature),
                        binning=Binning(bins))
    app = create_app(db, cors_origin=cors_origin)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
