"""Command-line client.

Every subcommand is a request to the HTTP service. By default the service
runs in-process; ``--server URL`` sends the same requests to a running
``loclearn serve`` instead. Sessions are carried between invocations as
JSON checkpoint files.
"""

import argparse
import json
import sys
import warnings

from loclearn.io import dataset_csv, read_dataset, table_csv


class ClientError(Exception):
    pass


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        # the in-process transport is starlette's test client; its deprecation notice is noise here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from loclearn.service.app import create_app

    return TestClient(create_app())


def _call(client, method, path, body=None):
    resp = client.request(method, path, json=body)
    try:
        doc = resp.json()
    except ValueError:
        doc = {"detail": resp.text}
    if resp.status_code >= 400:
        detail = doc.get("detail", doc)
        if isinstance(detail, list):  # request validation errors
            detail = "; ".join(f"{'.'.join(map(str, e.get('loc', [])))}: {e.get('msg')}" for e in detail)
        for field, msg in doc.get("errors", []):
            detail = f"{detail}\n  {field}: {msg}"
        raise ClientError(f"{doc.get('error', resp.status_code)}: {detail}")
    return doc


def _config_doc(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _body(args, names, config=None):
    body = dict(config or {})
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            body[name] = value
    return body


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_preprocess(args, client):
    body = _body(args, ["L", "epsilon", "dims", "seed", "scheme", "preset", "pool_size", "sample_cap"],
                 _config_doc(args.config))
    if args.partition_only:
        keep = {"L", "epsilon", "dims", "seed", "scheme"}
        doc = _call(client, "POST", "/preprocess", {k: v for k, v in body.items() if k in keep})
        _emit(json.dumps(doc, indent=2), args.out)
        return 0
    if args.data:
        X, y = read_dataset(args.data)
        body["points"] = X.tolist()
        if y is not None:
            body["labels"] = y.tolist()
    info = _call(client, "POST", "/sessions", body)
    ckpt = _call(client, "GET", f"/sessions/{info['session_id']}/checkpoint")
    _emit(json.dumps(ckpt), args.out)
    if args.out:
        print(json.dumps({k: info[k] for k in ("dims", "pool_size", "sample_cap")}))
    return 0


def cmd_query(args, client):
    with open(args.checkpoint) as fh:
        ckpt = json.load(fh)
    points = []
    if args.data:
        X, _ = read_dataset(args.data)
        points.extend(X.tolist())
    for text in args.x or []:
        points.append([float(v) for v in text.split(",")])
    if not points:
        raise ClientError("no query points: pass --data or --x")
    info = _call(client, "POST", "/sessions/restore", {"checkpoint": ckpt})
    sid = info["session_id"]
    result = _call(client, "POST", f"/sessions/{sid}/query", {"points": points})
    if not args.no_save:
        ckpt = _call(client, "GET", f"/sessions/{sid}/checkpoint")
        with open(args.checkpoint, "w") as fh:
            json.dump(ckpt, fh)
    _call(client, "DELETE", f"/sessions/{sid}")
    _emit(dataset_csv(points, result["values"]).replace(",y\n", ",value\n", 1), args.out)
    return 0


def cmd_estimate(args, client):
    body = _body(args, ["L", "epsilon", "dims", "seed", "preset"], _config_doc(args.config))
    doc = _call(client, "POST", "/estimate-error", body)
    _emit(json.dumps(doc, indent=2), args.out)
    return 0


def cmd_nw(args, client):
    body = _body(args, ["epsilon", "delta", "seed", "kde_mode", "dims", "N", "preset"], _config_doc(args.config))
    if args.data:
        X, y = read_dataset(args.data)
        if y is None:
            raise ClientError(f"{args.data}: NW datasets need a y column")
        body.update(points=X.tolist(), labels=y.tolist(), dims=X.shape[1])
    doc = _call(client, "POST", "/nw-error", body)
    _emit(json.dumps(doc, indent=2), args.out)
    return 0


def cmd_properties(args, client):
    doc = _call(client, "POST", "/properties", {"seed": args.seed or 0, "checks": args.check})
    _emit(table_csv(doc["checks"], ["check", "seed", "passed", "detail"]), args.out)
    return 0 if doc["passed"] else 1


def cmd_experiment(args, client):
    config = _config_doc(args.config)
    for name in ("L", "epsilon", "dims", "kde_mode"):
        if getattr(args, name, None) is not None:
            config[name] = getattr(args, name)
    if args.seed is not None:
        config["seeds"] = [args.seed]
    if args.data:
        config["data"] = args.data
    doc = _call(client, "POST", "/experiment", {"config": config})
    _emit(doc["csv"], args.out or config.get("output"))
    return 0 if doc["passed"] else 1


def cmd_serve(args, client=None):
    import uvicorn

    uvicorn.run("loclearn.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="loclearn", description=__doc__.splitlines()[0])
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scale(p, need_l=True):
        if need_l:
            p.add_argument("--L", type=float, dest="L")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--dims", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="JSON file with request fields")
        p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("preprocess", help="draw a partition and pool; write a session checkpoint")
    scale(p)
    p.add_argument("--scheme", choices=["interp", "extension"])
    p.add_argument("--data", help="pool CSV x1..xd[,y]; y gives table labels")
    p.add_argument("--preset", choices=["realizable", "pure_noise", "clusters"])
    p.add_argument("--pool-size", type=int, dest="pool_size")
    p.add_argument("--sample-cap", type=int, dest="sample_cap")
    p.add_argument("--partition-only", action="store_true", help="write only the partition JSON")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("query", help="answer points through a checkpointed session")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="CSV of query points x1..xd")
    p.add_argument("--x", action="append", help="one comma-separated point; repeatable")
    p.add_argument("--out")
    p.add_argument("--no-save", action="store_true", help="leave the checkpoint file untouched")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("estimate-error", help="estimate the best achievable L1 error")
    scale(p)
    p.add_argument("--preset", choices=["realizable", "pure_noise", "clusters"])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("nw-error", help="estimate the best Nadaraya-Watson loss over the transform net")
    scale(p, need_l=False)
    p.add_argument("--delta", type=float)
    p.add_argument("--kde-mode", dest="kde_mode", help="exact or subsample:<m>")
    p.add_argument("--data", help="dataset CSV x1..xd,y with binary y")
    p.add_argument("--N", type=int, dest="N", help="synthetic dataset size when --data is absent")
    p.add_argument("--preset", choices=["realizable", "pure_noise", "clusters"])
    p.set_defaults(func=cmd_nw)

    p = sub.add_parser("properties", help="run the invariant self-checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--check", action="append", help="run only this check; repeatable")
    p.add_argument("--out")
    p.set_defaults(func=cmd_properties)

    p = sub.add_parser("experiment", help="run an experiment config and write its CSV table")
    scale(p)
    p.add_argument("--data", help="dataset CSV for NW_EST")
    p.add_argument("--kde-mode", dest="kde_mode")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    try:
        with _client(args.server) as client:
            return args.func(args, client)
    except (ClientError, OSError, ValueError) as exc:
        print(f"loclearn {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
