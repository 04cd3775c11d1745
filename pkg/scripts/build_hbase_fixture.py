"""Regenerate fixtures/hbase_graph.json, the synthetic 25-segment snapshot-restore graph.

The planted fault sits in HBaseAdmin.restoreSnapshot: a rethrow inside the
rollback handler skips the failsafe-snapshot cleanup that follows the try block.
Bodies are written so plain lexical retrieval does not favour the faulty method.
Only the two in-class calls of restoreSnapshot are resolved edges; its table
lookup and snapshot creation go through external helpers outside the graph.

    python scripts/build_hbase_fixture.py
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PKG = "org.apache.hadoop.hbase"
ADMIN = "hbase-client/src/main/java/org/apache/hadoop/hbase/client/HBaseAdmin.java"
MANAGER = "hbase-server/src/main/java/org/apache/hadoop/hbase/master/snapshot/SnapshotManager.java"
PROC = "hbase-server/src/main/java/org/apache/hadoop/hbase/master/procedure/RestoreSnapshotProcedure.java"
UTILS = "hbase-server/src/main/java/org/apache/hadoop/hbase/snapshot/SnapshotDescriptionUtils.java"
HELPER = "hbase-server/src/main/java/org/apache/hadoop/hbase/snapshot/RestoreSnapshotHelper.java"
CLEANER = "hbase-server/src/main/java/org/apache/hadoop/hbase/master/snapshot/SnapshotHFileCleaner.java"
MASTER = "hbase-server/src/main/java/org/apache/hadoop/hbase/master/HMaster.java"
FS = "hbase-common/src/main/java/org/apache/hadoop/hbase/util/FSUtils.java"

# (id, kind, class, method, signature, document, body)
SEGMENTS = [
    ("admin.restoreSnapshot", "method", "client.HBaseAdmin", "restoreSnapshot",
     "void restoreSnapshot(String snapshotName, boolean takeFailSafeSnapshot)", ADMIN, """\
public void restoreSnapshot(final String snapshotName, final boolean takeFailSafeSnapshot)
    throws IOException, RestoreSnapshotException {
  TableName tableName = snapshotTables.get(snapshotName);
  String failSafeSnapshotSnapshotName = null;
  if (takeFailSafeSnapshot) {
    failSafeSnapshotSnapshotName = conf.get("hbase.snapshot.restore.failSafe.name",
        "hbase-failSafe-{snapshot.name}-{restore.timestamp}");
    snapshotClient.take(failSafeSnapshotSnapshotName, tableName);
  }
  try {
    internalRestoreSnapshotAsync(snapshotName, tableName).get(syncWaitTimeout, TimeUnit.MILLISECONDS);
  } catch (IOException e) {
    if (takeFailSafeSnapshot) {
      try {
        internalRestoreSnapshotAsync(failSafeSnapshotSnapshotName, tableName)
            .get(syncWaitTimeout, TimeUnit.MILLISECONDS);
        String msg = "Restore snapshot=" + snapshotName + " failed. Rollback to snapshot="
            + failSafeSnapshotSnapshotName + " succeeded.";
        LOG.error(msg, e);
        throw new RestoreSnapshotException(msg, e);
      } catch (IOException ex) {
        String msg = "Failed to restore and rollback to snapshot=" + failSafeSnapshotSnapshotName;
        LOG.error(msg, ex);
        throw new RestoreSnapshotException(msg, e);
      }
    } else {
      throw new RestoreSnapshotException("Failed to restore snapshot=" + snapshotName, e);
    }
  }
  if (takeFailSafeSnapshot) {
    try {
      LOG.info("Deleting restore-failSafe snapshot: " + failSafeSnapshotSnapshotName);
      deleteSnapshot(failSafeSnapshotSnapshotName);
    } catch (IOException e) {
      LOG.error("Unable to remove the failSafe snapshot: " + failSafeSnapshotSnapshotName, e);
    }
  }
}"""),
    ("admin.internalRestoreSnapshotAsync", "method", "client.HBaseAdmin", "internalRestoreSnapshotAsync",
     "Future<Void> internalRestoreSnapshotAsync(String snapshotName, TableName tableName)", ADMIN, """\
private Future<Void> internalRestoreSnapshotAsync(final String snapshotName, final TableName tableName)
    throws IOException {
  final SnapshotDescription snapshot = new SnapshotDescription(snapshotName, tableName);
  ClientSnapshotDescriptionUtils.assertSnapshotRequestIsValid(snapshot);
  RestoreSnapshotResponse response = executeCallable(new MasterCallable<RestoreSnapshotResponse>() {
    protected RestoreSnapshotResponse rpcCall() throws Exception {
      return master.restoreSnapshot(getRpcController(), buildRequest(snapshot));
    }
  });
  return new RestoreSnapshotFuture(this, snapshot, tableName, response);
}"""),
    ("admin.deleteSnapshot", "method", "client.HBaseAdmin", "deleteSnapshot",
     "void deleteSnapshot(String snapshotName)", ADMIN, """\
public void deleteSnapshot(final String snapshotName) throws IOException {
  TableName.isLegalFullyQualifiedTableName(Bytes.toBytes(snapshotName));
  executeCallable(new MasterCallable<Void>() {
    protected Void rpcCall() throws Exception {
      master.deleteSnapshot(getRpcController(), DeleteSnapshotRequest.newBuilder()
          .setSnapshot(SnapshotDescription.newBuilder().setName(snapshotName).build()).build());
      return null;
    }
  });
}"""),
    ("admin.snapshot", "method", "client.HBaseAdmin", "snapshot",
     "void snapshot(String snapshotName, TableName tableName)", ADMIN, """\
public void snapshot(final String snapshotName, final TableName tableName) throws IOException {
  SnapshotDescription desc = new SnapshotDescription(snapshotName, tableName, SnapshotType.FLUSH);
  takeSnapshot(desc);
  waitForSnapshotDone(desc, syncWaitTimeout);
}"""),
    ("admin.isTableDisabled", "method", "client.HBaseAdmin", "isTableDisabled",
     "boolean isTableDisabled(TableName tableName)", ADMIN, """\
public boolean isTableDisabled(TableName tableName) throws IOException {
  checkTableExists(tableName);
  // a table that is disabled in the cluster state reports DISABLED here
  return connection.isTableDisabled(tableName);
}"""),
    ("admin.getTableNameBeforeRestoreSnapshot", "method", "client.HBaseAdmin", "getTableNameBeforeRestoreSnapshot",
     "TableName getTableNameBeforeRestoreSnapshot(String snapshotName)", ADMIN, """\
private TableName getTableNameBeforeRestoreSnapshot(final String snapshotName) throws IOException {
  TableName tableName = null;
  for (SnapshotDescription desc : listSnapshots()) {
    if (desc.getName().equals(snapshotName)) {
      tableName = desc.getTableName();
      break;
    }
  }
  if (tableName == null) {
    throw new RestoreSnapshotException("Unable to find the table name for snapshot=" + snapshotName);
  }
  return tableName;
}"""),
    ("admin.listSnapshots", "method", "client.HBaseAdmin", "listSnapshots",
     "List<SnapshotDescription> listSnapshots()", ADMIN, """\
public List<SnapshotDescription> listSnapshots() throws IOException {
  return executeCallable(new MasterCallable<List<SnapshotDescription>>() {
    protected List<SnapshotDescription> rpcCall() throws Exception {
      return toDescriptions(master.getCompletedSnapshots(getRpcController(), request()));
    }
  });
}"""),
    ("admin.<init>", "constructor", "client.HBaseAdmin", "HBaseAdmin",
     "HBaseAdmin(ClusterConnection connection)", ADMIN, """\
HBaseAdmin(ClusterConnection connection) throws IOException {
  this.conf = connection.getConfiguration();
  this.connection = connection;
  this.syncWaitTimeout = conf.getInt("hbase.client.sync.wait.timeout.msec", 10 * 60000);
}"""),
    ("manager.restoreOrCloneSnapshot", "method", "master.snapshot.SnapshotManager", "restoreOrCloneSnapshot",
     "long restoreOrCloneSnapshot(SnapshotDescription reqSnapshot, NonceKey nonceKey)", MANAGER, """\
public long restoreOrCloneSnapshot(final SnapshotDescription reqSnapshot, final NonceKey nonceKey)
    throws IOException {
  FileSystem fs = master.getMasterFileSystem().getFileSystem();
  Path snapshotDir = SnapshotDescriptionUtils.getCompletedSnapshotDir(reqSnapshot, rootDir);
  if (!fs.exists(snapshotDir)) {
    throw new SnapshotDoesNotExistException(reqSnapshot);
  }
  TableName tableName = TableName.valueOf(reqSnapshot.getTable());
  if (master.getTableDescriptors().exists(tableName)) {
    return restoreSnapshot(reqSnapshot, tableName, nonceKey);
  }
  return cloneSnapshot(reqSnapshot, tableName, nonceKey);
}"""),
    ("manager.deleteSnapshot", "method", "master.snapshot.SnapshotManager", "deleteSnapshot",
     "void deleteSnapshot(SnapshotDescription snapshot)", MANAGER, """\
public void deleteSnapshot(SnapshotDescription snapshot) throws IOException {
  checkSnapshotSupport();
  if (!isSnapshotCompleted(snapshot)) {
    throw new SnapshotDoesNotExistException(snapshot);
  }
  Path snapshotDir = SnapshotDescriptionUtils.getCompletedSnapshotDir(snapshot, rootDir);
  // removing the completed directory marks the snapshot deleted for every reader
  if (!FSUtils.delete(fs, snapshotDir, true)) {
    throw new HBaseSnapshotException("Failed to delete snapshot directory: " + snapshotDir);
  }
}"""),
    ("manager.takeSnapshot", "method", "master.snapshot.SnapshotManager", "takeSnapshot",
     "void takeSnapshot(SnapshotDescription snapshot)", MANAGER, """\
public void takeSnapshot(SnapshotDescription snapshot) throws IOException {
  SnapshotDescriptionUtils.validate(snapshot, master.getConfiguration());
  if (isTakingSnapshot(snapshot)) {
    throw new SnapshotCreationException("Rejected taking snapshot, already running");
  }
  // disabled tables get an offline snapshot, enabled tables a flush snapshot
  if (master.getTableStateManager().isTableState(snapshot.getTable(), TableState.State.DISABLED)) {
    snapshotDisabledTable(snapshot);
  } else {
    snapshotEnabledTable(snapshot);
  }
}"""),
    ("manager.cloneSnapshot", "method", "master.snapshot.SnapshotManager", "cloneSnapshot",
     "long cloneSnapshot(SnapshotDescription snapshot, TableName tableName, NonceKey nonceKey)", MANAGER, """\
private long cloneSnapshot(SnapshotDescription snapshot, TableName tableName, NonceKey nonceKey)
    throws IOException {
  TableDescriptor htd = SnapshotManifest.open(conf, fs, snapshotDir(snapshot), snapshot).getTableDescriptor();
  return master.getMasterProcedureExecutor().submitProcedure(
      new CloneSnapshotProcedure(env(), htd, snapshot), nonceKey);
}"""),
    ("manager.isSnapshotDone", "method", "master.snapshot.SnapshotManager", "isSnapshotDone",
     "boolean isSnapshotDone(SnapshotDescription expected)", MANAGER, """\
public boolean isSnapshotDone(SnapshotDescription expected) throws IOException {
  SnapshotSentinel handler = snapshotHandlers.get(expected.getTable());
  if (handler == null) {
    return isSnapshotCompleted(expected);
  }
  return handler.isFinished();
}"""),
    ("proc.<init>", "constructor", "master.procedure.RestoreSnapshotProcedure", "RestoreSnapshotProcedure",
     "RestoreSnapshotProcedure(MasterProcedureEnv env, TableDescriptor td, SnapshotDescription snapshot)", PROC, """\
public RestoreSnapshotProcedure(MasterProcedureEnv env, TableDescriptor td, SnapshotDescription snapshot) {
  super(env);
  this.modifiedTableDescriptor = td;
  this.snapshot = snapshot;
  this.restoreAcl = env.getMasterConfiguration().getBoolean("hbase.snapshot.restore.acl", false);
}"""),
    ("proc.executeFromState", "method", "master.procedure.RestoreSnapshotProcedure", "executeFromState",
     "Flow executeFromState(MasterProcedureEnv env, RestoreSnapshotState state)", PROC, """\
protected Flow executeFromState(MasterProcedureEnv env, RestoreSnapshotState state) {
  switch (state) {
    case RESTORE_SNAPSHOT_PRE_OPERATION:
      prepareRestore(env);
      setNextState(RestoreSnapshotState.RESTORE_SNAPSHOT_WRITE_FS_LAYOUT);
      return Flow.HAS_MORE_STATE;
    case RESTORE_SNAPSHOT_WRITE_FS_LAYOUT:
      restoreSnapshot(env);
      setNextState(RestoreSnapshotState.RESTORE_SNAPSHOT_UPDATE_META);
      return Flow.HAS_MORE_STATE;
    case RESTORE_SNAPSHOT_RESTORE_ACL:
      restoreSnapshotAcl(env);
      return Flow.NO_MORE_STATE;
    default:
      throw new UnsupportedOperationException("unhandled state=" + state);
  }
}"""),
    ("proc.rollbackState", "method", "master.procedure.RestoreSnapshotProcedure", "rollbackState",
     "void rollbackState(MasterProcedureEnv env, RestoreSnapshotState state)", PROC, """\
protected void rollbackState(MasterProcedureEnv env, RestoreSnapshotState state) {
  if (state == RestoreSnapshotState.RESTORE_SNAPSHOT_PRE_OPERATION) {
    // nothing to rollback, pre-restore is a read-only operation
    return;
  }
  // the table stays disabled after a rolled back restore; the cluster keeps the old layout
  throw new UnsupportedOperationException("unhandled rollback state=" + state);
}"""),
    ("proc.restoreSnapshotAcl", "method", "master.procedure.RestoreSnapshotProcedure", "restoreSnapshotAcl",
     "void restoreSnapshotAcl(MasterProcedureEnv env)", PROC, """\
private void restoreSnapshotAcl(MasterProcedureEnv env) throws IOException {
  if (restoreAcl && snapshot.hasUsersAndPermissions() && SnapshotDescriptionUtils.isSecurityAvailable(conf)) {
    RestoreSnapshotHelper.restoreSnapshotAcl(snapshot, getTableName(), env.getMasterConfiguration());
  }
}"""),
    ("utils.validate", "method", "snapshot.SnapshotDescriptionUtils", "validate",
     "SnapshotDescription validate(SnapshotDescription snapshot, Configuration conf)", UTILS, """\
public static SnapshotDescription validate(SnapshotDescription snapshot, Configuration conf)
    throws IllegalArgumentException, IOException {
  if (!snapshot.hasTable()) {
    throw new IllegalArgumentException("Descriptor doesn't apply to a table, so we can't build it.");
  }
  long time = snapshot.getCreationTime();
  if (time == NO_SNAPSHOT_START_TIME_SPECIFIED) {
    time = EnvironmentEdgeManager.currentTime();
    // creates the creation timestamp when the caller did not set one
    snapshot = snapshot.toBuilder().setCreationTime(time).build();
  }
  return snapshot;
}"""),
    ("utils.getCompletedSnapshotDir", "method", "snapshot.SnapshotDescriptionUtils", "getCompletedSnapshotDir",
     "Path getCompletedSnapshotDir(SnapshotDescription snapshot, Path rootDir)", UTILS, """\
public static Path getCompletedSnapshotDir(final SnapshotDescription snapshot, final Path rootDir) {
  return getCompletedSnapshotDir(snapshot.getName(), rootDir);
}"""),
    ("helper.restoreHdfsRegions", "method", "snapshot.RestoreSnapshotHelper", "restoreHdfsRegions",
     "RestoreMetaChanges restoreHdfsRegions()", HELPER, """\
public RestoreMetaChanges restoreHdfsRegions() throws IOException {
  Set<String> regionNames = new HashSet<>(snapshotManifest.getRegionManifestsMap().keySet());
  List<RegionInfo> tableRegions = getTableRegions();
  RestoreMetaChanges metaChanges = new RestoreMetaChanges(tableDesc, parentsMap);
  // regions that exist in the table but not in the snapshot are removed
  for (RegionInfo regionInfo : tableRegions) {
    if (!regionNames.remove(regionInfo.getEncodedName())) {
      metaChanges.addRegionToRemove(regionInfo);
    }
  }
  return metaChanges;
}"""),
    ("helper.restoreSnapshotAcl", "method", "snapshot.RestoreSnapshotHelper", "restoreSnapshotAcl",
     "void restoreSnapshotAcl(SnapshotDescription snapshot, TableName newTableName, Configuration conf)", HELPER, """\
public static void restoreSnapshotAcl(SnapshotDescription snapshot, TableName newTableName, Configuration conf)
    throws IOException {
  if (snapshot.hasUsersAndPermissions() && snapshot.getUsersAndPermissions() != null) {
    ListMultimap<String, UserPermission> perms = toUserTablePermissions(snapshot.getUsersAndPermissions());
    addUserPermissions(conf, newTableName, perms);
  }
}"""),
    ("cleaner.getDeletableFiles", "method", "master.snapshot.SnapshotHFileCleaner", "getDeletableFiles",
     "Iterable<FileStatus> getDeletableFiles(Iterable<FileStatus> files)", CLEANER, """\
public synchronized Iterable<FileStatus> getDeletableFiles(Iterable<FileStatus> files) {
  try {
    // files still referenced by a snapshot are never removed by the cleaner chore
    return cache.getUnreferencedFiles(files, master.getSnapshotManager());
  } catch (CorruptedSnapshotException cse) {
    LOG.debug("Corrupted in-progress snapshot file exception, ignored ", cse);
  } catch (IOException e) {
    LOG.error("Exception while checking if files were valid, keeping them just in case.", e);
  }
  return Collections.emptyList();
}"""),
    ("master.restoreSnapshot", "method", "master.HMaster", "restoreSnapshot",
     "long restoreSnapshot(SnapshotDescription snapshotDesc, long nonceGroup, long nonce)", MASTER, """\
public long restoreSnapshot(final SnapshotDescription snapshotDesc, final long nonceGroup, final long nonce)
    throws IOException {
  checkInitialized();
  getSnapshotManager().checkSnapshotSupport();
  final TableName dstTable = TableName.valueOf(snapshotDesc.getTable());
  getClusterSchema().getNamespace(dstTable.getNamespaceAsString());
  return MasterProcedureUtil.submitProcedure(new NonceProcedureRunnable(this, nonceGroup, nonce) {
    protected void run() throws IOException {
      setProcId(getSnapshotManager().restoreOrCloneSnapshot(snapshotDesc, getNonceKey()));
    }
  });
}"""),
    ("master.disableTable", "method", "master.HMaster", "disableTable",
     "long disableTable(TableName tableName, long nonceGroup, long nonce)", MASTER, """\
public long disableTable(final TableName tableName, final long nonceGroup, final long nonce)
    throws IOException {
  checkInitialized();
  // a disabled table cannot serve reads; the cluster marks its regions offline
  return MasterProcedureUtil.submitProcedure(new NonceProcedureRunnable(this, nonceGroup, nonce) {
    protected void run() throws IOException {
      submitProcedure(new DisableTableProcedure(procEnv(), tableName, false));
    }
  });
}"""),
    ("fs.delete", "method", "util.FSUtils", "delete",
     "boolean delete(FileSystem fs, Path path, boolean recursive)", FS, """\
public static boolean delete(final FileSystem fs, final Path path, final boolean recursive)
    throws IOException {
  // removed directories are gone for every cluster client once this returns
  return fs.delete(path, recursive);
}"""),
]

EDGES = [
    ("admin.restoreSnapshot", "admin.internalRestoreSnapshotAsync"),
    ("admin.restoreSnapshot", "admin.deleteSnapshot"),
    ("admin.internalRestoreSnapshotAsync", "master.restoreSnapshot"),
    ("admin.deleteSnapshot", "manager.deleteSnapshot"),
    ("admin.snapshot", "manager.takeSnapshot"),
    ("admin.snapshot", "manager.isSnapshotDone"),
    ("admin.getTableNameBeforeRestoreSnapshot", "admin.listSnapshots"),
    ("admin.isTableDisabled", "master.disableTable"),
    ("master.restoreSnapshot", "manager.restoreOrCloneSnapshot"),
    ("manager.restoreOrCloneSnapshot", "utils.getCompletedSnapshotDir"),
    ("manager.restoreOrCloneSnapshot", "manager.cloneSnapshot"),
    ("manager.restoreOrCloneSnapshot", "proc.<init>"),
    ("manager.deleteSnapshot", "utils.getCompletedSnapshotDir"),
    ("manager.deleteSnapshot", "fs.delete"),
    ("manager.takeSnapshot", "utils.validate"),
    ("manager.takeSnapshot", "master.disableTable"),
    ("manager.cloneSnapshot", "utils.getCompletedSnapshotDir"),
    ("proc.executeFromState", "proc.restoreSnapshotAcl"),
    ("proc.executeFromState", "helper.restoreHdfsRegions"),
    ("proc.executeFromState", "proc.rollbackState"),
    ("proc.restoreSnapshotAcl", "helper.restoreSnapshotAcl"),
    ("proc.restoreSnapshotAcl", "utils.validate"),
    ("helper.restoreHdfsRegions", "fs.delete"),
    ("cleaner.getDeletableFiles", "manager.isSnapshotDone"),
    ("admin.<init>", "admin.listSnapshots"),
    ("cleaner.getDeletableFiles", "fs.delete"),
    ("manager.cloneSnapshot", "proc.<init>"),
]

INHERITS = [
    ("proc.executeFromState", "proc.<init>"),
    ("proc.rollbackState", "proc.<init>"),
    ("manager.cloneSnapshot", "manager.restoreOrCloneSnapshot"),
    ("helper.restoreSnapshotAcl", "proc.restoreSnapshotAcl"),
]


def build() -> dict:
    segments = []
    for sid, kind, cls, method, sig, doc, body in SEGMENTS:
        segments.append(
            {
                "id": sid,
                "kind": kind,
                "qualified_name": f"{PKG}.{cls}.{method}",
                "signature": sig,
                "document_path": doc,
                "start_line": 1,
                "end_line": body.count("\n") + 1,
                "body": body,
            }
        )
    edges = [{"from": a, "to": b, "kind": "invokes"} for a, b in EDGES]
    edges += [{"from": a, "to": b, "kind": "inherits"} for a, b in INHERITS]
    return {"system": "hbase", "version": "2.4.0", "segments": segments, "edges": edges}


if __name__ == "__main__":
    fixture = build()
    out = ROOT / "fixtures" / "hbase_graph.json"
    out.write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}: {len(fixture['segments'])} segments, {len(fixture['edges'])} edges")
