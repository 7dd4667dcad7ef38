use roxmltree::Node;

use super::xml::{self, Writer};
use super::CodecError;
use crate::model::{
    DependencyEndpoint, DependencyGroup, Descriptor, GroupOp, ResourceRequirements, ServiceRef,
    UnitId, DEFAULT_PRIORITY,
};

const UNIT_ATTRS: &[&str] = &[
    "name",
    "version",
    "kind",
    "provider",
    "priority",
    "package-sha256",
    "package-location",
];

pub fn parse_descriptor(bytes: &[u8]) -> Result<Descriptor, CodecError> {
    let doc = xml::parse_document(bytes)?;
    let root = doc.root_element();
    xml::expect_element(root, "deployment-unit", UNIT_ATTRS)?;

    let id = UnitId::new(
        xml::required(root, "name")?,
        xml::required_parsed(root, "version")?,
        xml::required_parsed(root, "kind")?,
    )?;
    let priority = match root.attribute("priority") {
        Some(p) => xml::parse_uint::<u8>(root, "priority", p)?,
        None => DEFAULT_PRIORITY,
    };

    let mut provides = None;
    let mut groups = None;
    let mut requirements = None;
    for child in xml::child_elements(root)? {
        let slot_taken = match child.tag_name().name() {
            "provides" => provides.replace(parse_provides(child)?).is_some(),
            "dependencies" => groups.replace(parse_dependencies(child)?).is_some(),
            "requirements" => requirements.replace(parse_requirements(child)?).is_some(),
            other => {
                return Err(CodecError::SchemaViolation(format!(
                    "unknown element <{other}> in <deployment-unit>"
                )))
            }
        };
        if slot_taken {
            return Err(CodecError::SchemaViolation(format!(
                "repeated <{}> element",
                child.tag_name().name()
            )));
        }
    }

    let descriptor = Descriptor {
        id,
        provider: xml::required(root, "provider")?.to_string(),
        priority,
        provides: provides.unwrap_or_default(),
        groups: groups.unwrap_or_default(),
        requirements: requirements.unwrap_or_default(),
        package_sha256: xml::required_parsed(root, "package-sha256")?,
        package_location: xml::required(root, "package-location")?.to_string(),
    };
    descriptor.validate()?;
    Ok(descriptor)
}

pub(super) fn parse_service(node: Node<'_, '_>) -> Result<ServiceRef, CodecError> {
    xml::expect_element(node, "service", &["name", "version"])?;
    if !xml::child_elements(node)?.is_empty() {
        return Err(CodecError::SchemaViolation(
            "<service> must be empty".into(),
        ));
    }
    Ok(ServiceRef::new(
        xml::required(node, "name")?,
        xml::required_parsed(node, "version")?,
    )?)
}

fn parse_provides(node: Node<'_, '_>) -> Result<Vec<ServiceRef>, CodecError> {
    xml::expect_element(node, "provides", &[])?;
    xml::child_elements(node)?
        .into_iter()
        .map(parse_service)
        .collect()
}

fn parse_dependencies(node: Node<'_, '_>) -> Result<Vec<DependencyGroup>, CodecError> {
    xml::expect_element(node, "dependencies", &[])?;
    xml::child_elements(node)?
        .into_iter()
        .map(parse_group)
        .collect()
}

fn parse_group(node: Node<'_, '_>) -> Result<DependencyGroup, CodecError> {
    xml::expect_element(node, "dependency", &["type", "cardinality"])?;
    let ty = xml::required(node, "type")?;
    let op: GroupOp = ty
        .parse()
        .map_err(|_| CodecError::UnknownDependencyType(ty.to_string()))?;
    let cardinality = match node.attribute("cardinality") {
        Some(c) => xml::parse_uint::<u32>(node, "cardinality", c)?,
        None => 1,
    };
    let endpoints = xml::child_elements(node)?
        .into_iter()
        .map(parse_endpoint)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DependencyGroup::new(op, cardinality, endpoints)?)
}

fn parse_endpoint(node: Node<'_, '_>) -> Result<DependencyEndpoint, CodecError> {
    xml::expect_element(node, "endpoint", &["service", "range", "repository"])?;
    if !xml::child_elements(node)?.is_empty() {
        return Err(CodecError::SchemaViolation(
            "<endpoint> must be empty".into(),
        ));
    }
    let mut endpoint = DependencyEndpoint::new(
        xml::required(node, "service")?,
        xml::required_parsed(node, "range")?,
    )?;
    if let Some(repo) = node.attribute("repository") {
        endpoint.repository = Some(xml::parsed(node, "repository", repo)?);
    }
    Ok(endpoint)
}

fn parse_requirements(node: Node<'_, '_>) -> Result<ResourceRequirements, CodecError> {
    xml::expect_element(
        node,
        "requirements",
        &["disk-space-kib", "architecture", "os"],
    )?;
    if !xml::child_elements(node)?.is_empty() {
        return Err(CodecError::SchemaViolation(
            "<requirements> must be empty".into(),
        ));
    }
    Ok(ResourceRequirements {
        disk_space_kib: xml::parse_uint(
            node,
            "disk-space-kib",
            xml::required(node, "disk-space-kib")?,
        )?,
        architecture: node.attribute("architecture").map(str::to_string),
        os: node.attribute("os").map(str::to_string),
    })
}

/// Canonical encoding of a descriptor. Equal values encode to equal bytes.
pub fn serialize_descriptor(d: &Descriptor) -> Vec<u8> {
    let mut w = Writer::new();
    let version = d.id.version.to_string();
    let priority = d.priority.to_string();
    w.start(
        0,
        "deployment-unit",
        &[
            ("name", &d.id.name),
            ("version", &version),
            ("kind", d.id.kind.as_str()),
            ("provider", &d.provider),
            ("priority", &priority),
            ("package-sha256", d.package_sha256.as_str()),
            ("package-location", &d.package_location),
        ],
    );
    w.open_end();

    w.start(1, "provides", &[]);
    if d.provides.is_empty() {
        w.empty_end();
    } else {
        w.open_end();
        for s in &d.provides {
            write_service(&mut w, 2, s);
        }
        w.close(1, "provides");
    }

    w.start(1, "dependencies", &[]);
    if d.groups.is_empty() {
        w.empty_end();
    } else {
        w.open_end();
        for g in &d.groups {
            let cardinality = g.cardinality.to_string();
            w.start(
                2,
                "dependency",
                &[("type", g.op.as_str()), ("cardinality", &cardinality)],
            );
            w.open_end();
            for e in &g.endpoints {
                let range = e.range.to_string();
                let repo = e.repository.as_ref().map(|u| u.to_string());
                let mut attrs = vec![("service", e.service.as_str()), ("range", range.as_str())];
                if let Some(r) = &repo {
                    attrs.push(("repository", r.as_str()));
                }
                w.start(3, "endpoint", &attrs);
                w.empty_end();
            }
            w.close(2, "dependency");
        }
        w.close(1, "dependencies");
    }

    let disk = d.requirements.disk_space_kib.to_string();
    let mut attrs = vec![("disk-space-kib", disk.as_str())];
    if let Some(a) = &d.requirements.architecture {
        attrs.push(("architecture", a));
    }
    if let Some(o) = &d.requirements.os {
        attrs.push(("os", o));
    }
    w.start(1, "requirements", &attrs);
    w.empty_end();
    w.close(0, "deployment-unit");
    w.finish()
}

pub(super) fn write_service(w: &mut Writer, depth: usize, s: &ServiceRef) {
    let version = s.version.to_string();
    w.start(
        depth,
        "service",
        &[("name", &s.name), ("version", &version)],
    );
    w.empty_end();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UnitKind;

    const SHA: &str = "0000000000000000000000000000000000000000000000000000000000000000";

    fn minimal() -> String {
        format!(
            r#"<deployment-unit name="org.acme.A" version="1.0.0" kind="bundle" provider="acme" package-sha256="{SHA}" package-location="pkgs/a.jar"/>"#
        )
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let d = parse_descriptor(minimal().as_bytes()).unwrap();
        assert_eq!(d.id.kind, UnitKind::Bundle);
        assert_eq!(d.priority, 50);
        assert!(d.groups.is_empty());
        assert!(d.provides.is_empty());
        assert_eq!(d.requirements, ResourceRequirements::default());
    }

    #[test]
    fn and_group_parses() {
        let doc = format!(
            r#"<deployment-unit name="A" version="1.0.0" kind="bundle" provider="acme" package-sha256="{SHA}" package-location="pkgs/a.jar">
  <dependencies>
    <dependency type="AND">
      <endpoint service="org.x.S" range="[1.0.0,2.0.0)"/>
    </dependency>
  </dependencies>
</deployment-unit>
"#
        );
        let d = parse_descriptor(doc.as_bytes()).unwrap();
        assert_eq!(d.groups.len(), 1);
        assert_eq!(d.groups[0].op, GroupOp::And);
        assert_eq!(d.groups[0].endpoints[0].service, "org.x.S");
    }

    #[test]
    fn unknown_operator_is_rejected() {
        let doc = minimal().replace(
            "/>",
            r#"><dependencies><dependency type="MAYBE"><endpoint service="S" range="*"/></dependency></dependencies></deployment-unit>"#,
        );
        assert_eq!(
            parse_descriptor(doc.as_bytes()),
            Err(CodecError::UnknownDependencyType("MAYBE".into()))
        );
    }

    #[test]
    fn zero_groups_serialize_to_empty_element() {
        let d = parse_descriptor(minimal().as_bytes()).unwrap();
        let text = String::from_utf8(serialize_descriptor(&d)).unwrap();
        assert_eq!(
            text,
            format!(
                "<deployment-unit name=\"org.acme.A\" version=\"1.0.0\" kind=\"bundle\" provider=\"acme\" priority=\"50\" package-sha256=\"{SHA}\" package-location=\"pkgs/a.jar\">\n  <provides/>\n  <dependencies/>\n  <requirements disk-space-kib=\"0\"/>\n</deployment-unit>\n"
            )
        );
        assert_eq!(parse_descriptor(text.as_bytes()).unwrap(), d);
    }

    #[test]
    fn rejects_schema_breaks() {
        let cases = [
            minimal().replace("kind=\"bundle\"", "kind=\"applet\""),
            minimal().replace(" provider=\"acme\"", ""),
            minimal().replace("/>", " extra=\"1\"/>"),
            minimal().replace("/>", " priority=\"101\"/>"),
            minimal().replace("/>", "><bogus/></deployment-unit>"),
            minimal().replace("/>", ">text</deployment-unit>"),
            minimal().replace("/>", "><provides/><provides/></deployment-unit>"),
            minimal().replace("pkgs/a.jar", "/abs/a.jar"),
            minimal().replace(SHA, "xyz"),
            minimal().replace("/>", r#"><dependencies><dependency type="OR" cardinality="2"><endpoint service="S" range="*"/></dependency></dependencies></deployment-unit>"#),
            minimal().replace("/>", r#"><dependencies><dependency type="AND"/></dependencies></deployment-unit>"#),
            minimal().replace("/>", r#"><dependencies><dependency type="AND"><endpoint service="S" range="*" repository="not a url"/></dependency></dependencies></deployment-unit>"#),
        ];
        for doc in cases {
            assert!(
                matches!(
                    parse_descriptor(doc.as_bytes()),
                    Err(CodecError::SchemaViolation(_))
                ),
                "accepted: {doc}"
            );
        }
        assert!(matches!(
            parse_descriptor(b"<deployment-unit"),
            Err(CodecError::MalformedDocument(_))
        ));
        assert!(matches!(
            parse_descriptor(&[0xff, 0xfe]),
            Err(CodecError::MalformedDocument(_))
        ));
    }
}
