"""Readers for raw dataset trees.

FakeNewsNet layout (per its repo):
    <root>[/<source>]/{fake,real}/<news_id>/news content.json
    <root>[/<source>]/{fake,real}/<news_id>/tweets/<tweet_id>.json
    <root>[/<source>]/{fake,real}/<news_id>/retweets/<tweet_id>.json
    optional <root>/user_followers/<user_id>.json

PHEME layout (per its release):
    <root>/<event>/{rumours,non-rumours}/<thread_id>/source-tweets/<id>.json
    <root>/<event>/{rumours,non-rumours}/<thread_id>/reactions/<id>.json

Both reduce to the same record model: labeled news, posts with authors and
engagement stats, users with profile fields, and typed string-id edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MalformedRecord

LABELS = {"fake": 0, "real": 1, "rumours": 0, "non-rumours": 1}


@dataclass
class NewsRecord:
    id: str
    label: int
    text: str = ""
    image: bytes | None = None


@dataclass
class PostRecord:
    id: str
    text: str = ""
    stats: dict = field(default_factory=dict)


@dataclass
class UserRecord:
    id: str
    description: str = ""
    stats: dict = field(default_factory=dict)


@dataclass
class RawDataset:
    schema: str
    news: dict[str, NewsRecord] = field(default_factory=dict)
    posts: dict[str, PostRecord] = field(default_factory=dict)
    users: dict[str, UserRecord] = field(default_factory=dict)
    edges: set = field(default_factory=set)  # (etype, src_string_id, dst_string_id)

    def add_edge(self, etype: str, src: str, dst: str) -> None:
        if src != dst:
            self.edges.add((etype, src, dst))


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRecord(str(path), f"invalid JSON ({exc})") from exc


def _ingest_user(ds: RawDataset, obj: dict, origin: str) -> str:
    user = obj.get("user")
    if not isinstance(user, dict) or not (user.get("id_str") or user.get("id")):
        raise MalformedRecord(origin, "tweet has no user id")
    uid = "u:" + str(user.get("id_str") or user.get("id"))
    if uid not in ds.users:
        ds.users[uid] = UserRecord(
            id=uid,
            description=user.get("description") or "",
            stats={
                "followers_count": user.get("followers_count", 0),
                "friends_count": user.get("friends_count", 0),
                "verified": user.get("verified", False),
                "has_location": bool((user.get("location") or "").strip()),
            },
        )
    return uid


def _ingest_tweet(ds: RawDataset, obj: dict, origin: str) -> str:
    raw_id = obj.get("id_str") or obj.get("id")
    if raw_id is None:
        raise MalformedRecord(origin, "tweet has no id")
    pid = "p:" + str(raw_id)
    uid = _ingest_user(ds, obj, origin)
    if pid not in ds.posts:
        ds.posts[pid] = PostRecord(
            id=pid,
            text=obj.get("full_text") or obj.get("text") or "",
            stats={
                "retweet_count": obj.get("retweet_count", 0),
                "favorite_count": obj.get("favorite_count", 0),
            },
        )
    ds.add_edge("pu", pid, uid)
    return pid


def read_fakenewsnet(root) -> RawDataset:
    root = Path(root)
    ds = RawDataset(schema="fakenewsnet")
    news_dirs = []
    for label_name in ("fake", "real"):
        news_dirs += sorted(root.glob(f"{label_name}/*"))
        news_dirs += sorted(root.glob(f"*/{label_name}/*"))
    for news_dir in news_dirs:
        if not news_dir.is_dir():
            continue
        label = LABELS[news_dir.parent.name]
        nid = "n:" + news_dir.name
        content_path = news_dir / "news content.json"
        text, image = "", None
        if content_path.exists():
            content = _read_json(content_path)
            text = content.get("text") or content.get("title") or ""
            top_img = content.get("top_img") or ""
            if top_img:
                image = top_img.encode("utf-8")
        ds.news[nid] = NewsRecord(id=nid, label=label, text=text, image=image)

        for tweet_path in sorted((news_dir / "tweets").glob("*.json")):
            pid = _ingest_tweet(ds, _read_json(tweet_path), str(tweet_path))
            ds.add_edge("np", nid, pid)
        for rt_path in sorted((news_dir / "retweets").glob("*.json")):
            source_pid = "p:" + rt_path.stem
            payload = _read_json(rt_path)
            retweets = payload.get("retweets", payload if isinstance(payload, list) else [])
            for obj in retweets:
                pid = _ingest_tweet(ds, obj, str(rt_path))
                if source_pid in ds.posts:
                    ds.add_edge("pp", pid, source_pid)
                else:
                    ds.add_edge("np", nid, pid)

    followers_dir = root / "user_followers"
    if followers_dir.is_dir():
        for path in sorted(followers_dir.glob("*.json")):
            payload = _read_json(path)
            uid = "u:" + str(payload.get("user_id", path.stem))
            if uid not in ds.users:
                continue
            for follower in payload.get("followers", []):
                fid = "u:" + str(follower)
                if fid in ds.users:
                    ds.add_edge("uu", uid, fid)
    return ds


def read_pheme(root) -> RawDataset:
    root = Path(root)
    ds = RawDataset(schema="pheme")
    for label_name in ("rumours", "non-rumours"):
        for thread_dir in sorted(root.glob(f"*/{label_name}/*")):
            if not thread_dir.is_dir():
                continue
            label = LABELS[label_name]
            nid = "n:" + thread_dir.name
            source_paths = sorted((thread_dir / "source-tweets").glob("*.json"))
            if not source_paths:
                raise MalformedRecord(str(thread_dir), "thread has no source tweet")
            source = _read_json(source_paths[0])
            ds.news[nid] = NewsRecord(
                id=nid, label=label,
                text=source.get("full_text") or source.get("text") or "",
            )
            author = _ingest_user(ds, source, str(source_paths[0]))
            ds.add_edge("nu", nid, author)
            source_pid = _ingest_tweet(ds, source, str(source_paths[0]))
            ds.add_edge("np", nid, source_pid)
            for reaction_path in sorted((thread_dir / "reactions").glob("*.json")):
                obj = _read_json(reaction_path)
                pid = _ingest_tweet(ds, obj, str(reaction_path))
                parent = obj.get("in_reply_to_status_id_str") or obj.get("in_reply_to_status_id")
                parent_pid = "p:" + str(parent) if parent is not None else None
                if parent_pid and parent_pid in ds.posts and parent_pid != pid:
                    ds.add_edge("pp", pid, parent_pid)
                else:
                    ds.add_edge("np", nid, pid)
    return ds


READERS = {"fakenewsnet": read_fakenewsnet, "pheme": read_pheme}


def read_raw(root, dataset: str) -> RawDataset:
    try:
        reader = READERS[dataset]
    except KeyError:
        raise MalformedRecord(dataset, f"unknown dataset layout (expected one of {sorted(READERS)})") from None
    return reader(root)
